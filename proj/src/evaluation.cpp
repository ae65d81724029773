#include "expevo/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

namespace expevo {

double mse(std::span<const double> predicted, std::span<const double> actual) {
  if (predicted.size() != actual.size()) throw std::invalid_argument("mse: length mismatch");
  if (predicted.empty()) throw std::invalid_argument("mse: empty input");
  double s = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) s += (predicted[i] - actual[i]) * (predicted[i] - actual[i]);
  return s / static_cast<double>(predicted.size());
}

namespace {

double dcg(std::span<const double> rel, std::size_t p) {
  double s = 0.0;
  for (std::size_t i = 0; i < std::min(p, rel.size()); ++i) s += i == 0 ? rel[0] : rel[i] / std::log2(i + 1.0);
  return s;
}

}  // namespace

double ndcg(std::span<const double> ranked_relevance, std::size_t p) {
  if (p > ranked_relevance.size()) throw std::invalid_argument("ndcg: cutoff exceeds list length");
  std::vector<double> ideal(ranked_relevance.begin(), ranked_relevance.end());
  std::sort(ideal.begin(), ideal.end(), std::greater<>());
  const double idcg = dcg(ideal, p);
  if (idcg == 0.0) return 0.0;
  return dcg(ranked_relevance, p) / idcg;
}

std::uint64_t count_inversions(std::vector<std::int64_t> values) {
  std::vector<std::int64_t> buffer(values.size());
  std::uint64_t inversions = 0;
  for (std::size_t width = 1; width < values.size(); width *= 2) {
    for (std::size_t lo = 0; lo < values.size(); lo += 2 * width) {
      const std::size_t mid = std::min(lo + width, values.size());
      const std::size_t hi = std::min(lo + 2 * width, values.size());
      std::size_t i = lo, j = mid, k = lo;
      while (i < mid && j < hi) {
        if (values[j] < values[i]) {
          inversions += mid - i;
          buffer[k++] = values[j++];
        } else {
          buffer[k++] = values[i++];
        }
      }
      while (i < mid) buffer[k++] = values[i++];
      while (j < hi) buffer[k++] = values[j++];
    }
    values.swap(buffer);
  }
  return inversions;
}

double kendall_tau_distance(std::span<const std::int64_t> rank_a, std::span<const std::int64_t> rank_b) {
  if (rank_a.size() != rank_b.size()) throw std::invalid_argument("kendall_tau_distance: different elements");
  const std::size_t n = rank_a.size();
  std::map<std::int64_t, std::int64_t> position;
  for (std::size_t i = 0; i < n; ++i)
    if (!position.emplace(rank_b[i], static_cast<std::int64_t>(i)).second)
      throw std::invalid_argument("kendall_tau_distance: duplicate element");
  std::vector<std::int64_t> seq(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto it = position.find(rank_a[i]);
    if (it == position.end()) throw std::invalid_argument("kendall_tau_distance: different elements");
    seq[i] = it->second;
  }
  if (n < 2) return 0.0;
  const double pairs = static_cast<double>(n) * static_cast<double>(n - 1) / 2.0;
  return static_cast<double>(count_inversions(std::move(seq))) / pairs;
}

double kendall_tau_distance(std::span<const std::string> rank_a, std::span<const std::string> rank_b) {
  std::map<std::string, std::int64_t> ids;
  for (const auto& s : rank_b) ids.emplace(s, static_cast<std::int64_t>(ids.size()));
  std::vector<std::int64_t> a(rank_a.size()), b(rank_b.size());
  for (std::size_t i = 0; i < rank_b.size(); ++i) b[i] = ids.at(rank_b[i]);
  for (std::size_t i = 0; i < rank_a.size(); ++i) {
    const auto it = ids.find(rank_a[i]);
    if (it == ids.end()) throw std::invalid_argument("kendall_tau_distance: different elements");
    a[i] = it->second;
  }
  return kendall_tau_distance(a, b);
}

double kl_divergence(std::span<const double> p, std::span<const double> q, double smoothing) {
  if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: support size mismatch");
  if (smoothing < 0.0) throw std::invalid_argument("kl_divergence: negative smoothing");
  double p_total = 0.0, q_total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p_total += p[i] + smoothing;
    q_total += q[i] + smoothing;
  }
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double pi = (p[i] + smoothing) / p_total;
    const double qi = (q[i] + smoothing) / q_total;
    if (pi == 0.0) continue;
    if (qi == 0.0) return std::numeric_limits<double>::infinity();
    kl += pi * std::log(pi / qi);
  }
  return std::max(kl, 0.0);
}

std::vector<std::size_t> experience_bins(std::span<const double> final_experience, std::size_t bins) {
  if (bins < 1) throw std::invalid_argument("experience_bins: need at least one bin");
  const std::size_t n = final_experience.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return final_experience[a] < final_experience[b]; });
  std::vector<std::size_t> bin(n);
  for (std::size_t r = 0; r < n; ++r) bin[order[r]] = r * bins / n;
  return bin;
}

Array2<double> experience_divergence_heatmap(const Corpus& corpus, std::span<const double> final_experience,
                                             std::size_t bins, double smoothing) {
  if (final_experience.size() != corpus.num_users())
    throw std::invalid_argument("experience_divergence_heatmap: one experience value per user");
  const auto bin = experience_bins(final_experience, bins);
  const std::size_t V = corpus.vocabulary().size();
  Array2<double> counts(bins, V, 0.0);
  std::vector<double> mass(bins, 0.0);
  for (std::size_t d = 0; d < corpus.size(); ++d) {
    const std::size_t b = bin[corpus.user_of(d)];
    for (auto w : corpus[d].tokens) {
      counts(b, static_cast<std::size_t>(w)) += 1.0;
      mass[b] += 1.0;
    }
  }
  Array2<double> heat(bins, bins, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < bins; ++i) {
    if (mass[i] == 0.0) continue;
    for (std::size_t j = 0; j < bins; ++j) {
      if (mass[j] == 0.0) continue;
      heat(i, j) = i == j ? 0.0 : kl_divergence(counts.row(i), counts.row(j), smoothing);
    }
  }
  return heat;
}

}  // namespace expevo
