#include <string>
#include <vector>

#include "commands.hpp"

int main(int argc, char** argv) {
  return expevo::cli::run(std::vector<std::string>(argv, argv + argc));
}
