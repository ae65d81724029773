#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "expevo/corpus.hpp"
#include "expevo/tensor.hpp"

namespace expevo {

double mse(std::span<const double> predicted, std::span<const double> actual);

// DCG_p = rel_1 + sum_{i=2..p} rel_i / log2(i), normalized by the DCG of the
// ideal ordering. 0 when nothing is relevant.
double ndcg(std::span<const double> ranked_relevance, std::size_t p);

// Discordant pairs / C(n, 2) between two orderings of the same elements.
double kendall_tau_distance(std::span<const std::int64_t> rank_a, std::span<const std::int64_t> rank_b);
double kendall_tau_distance(std::span<const std::string> rank_a, std::span<const std::string> rank_b);

// Number of inversions of a sequence, counted by merge sort.
std::uint64_t count_inversions(std::vector<std::int64_t> values);

// Adds `smoothing` to every entry of both inputs, renormalizes, and returns
// sum p ln(p / q).
double kl_divergence(std::span<const double> p, std::span<const double> q, double smoothing = 0.01);

// Users are binned into `bins` equal-count quantiles of their final
// experience; each bin gets the unigram counts of its users' reviews; entry
// (i, j) is KL(P_i || P_j). Rows and columns of empty bins are NaN.
Array2<double> experience_divergence_heatmap(const Corpus& corpus, std::span<const double> final_experience,
                                             std::size_t bins, double smoothing = 0.01);

// Quantile bin of every user (equal-count, ordered by experience with ties
// broken by user index).
std::vector<std::size_t> experience_bins(std::span<const double> final_experience, std::size_t bins);

}  // namespace expevo
