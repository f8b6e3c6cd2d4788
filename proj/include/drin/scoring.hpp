#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "drin/graph.hpp"
#include "drin/tape.hpp"

namespace drin {

/// Cosine between the final mention-text vertex and each candidate-text
/// vertex; image vertices are not read. Throws DegenerateOutputError if a
/// text vertex has collapsed to zero.
template <typename T>
Var score_candidates(Tape<T>& tape, Var H, const VertexRoles& roles);

struct ScoredMention {
    Var scores;
    std::size_t gold = 0;
};

/// Sum over mentions of max(S_neg - S_pos + margin, 0), where S_pos is the
/// gold score and S_neg the mean score of that mention's other candidates.
template <typename T>
Var margin_loss(Tape<T>& tape, std::span<const ScoredMention> batch, T margin);

struct RankingResult {
    std::string sample_id;
    std::vector<double> scores;
    std::size_t predicted_index = 0;
    std::size_t gold_index = 0;
    std::map<int, bool> topk_hits;
};

/// Index of the largest score; lowest index wins exact ties.
std::size_t argmax_first(std::span<const double> scores);

/// Number of candidates scoring strictly above the gold one.
std::size_t outranked_count(std::span<const double> scores, std::size_t gold);

RankingResult make_ranking(std::string sample_id, std::vector<double> scores, std::size_t gold,
                           std::span<const int> ks);

/// Fraction of mentions whose gold candidate is strictly outranked by fewer
/// than K others, for each K. Ties with the gold do not count against it.
std::map<int, double> topk_accuracy(std::span<const RankingResult> results, std::span<const int> ks);

/// {"top1": .., "top5": .., ...} in the order of `ks`.
nlohmann::ordered_json metrics_json(const std::map<int, double>& metrics, std::span<const int> ks);

/// Two-line plain-text table with one column per K, in the order of `ks`.
std::string metrics_table(const std::map<int, double>& metrics, std::span<const int> ks);

} // namespace drin
