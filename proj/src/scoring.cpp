#include "drin/scoring.hpp"

#include <cstdio>
#include <sstream>

#include "drin/error.hpp"

namespace drin {

template <typename T>
Var score_candidates(Tape<T>& tape, Var H, const VertexRoles& roles) {
    const Tensor<T>& h = tape.value(H);
    if (h.rank() != 2 || h.rows() != roles.n()) {
        throw ShapeError("score_candidates: H " + shape_str(h.shape()) + " does not hold " +
                         std::to_string(roles.n()) + " vertices");
    }
    auto check = [&h](std::size_t v) {
        for (T x : h.row(v)) {
            if (x != T{0}) {
                return;
            }
        }
        throw DegenerateOutputError("score_candidates: text vertex " + std::to_string(v) + " has zero norm");
    };
    check(VertexRoles::mention_text());
    const Var mention = tape.row(H, VertexRoles::mention_text());
    std::vector<Var> scores;
    scores.reserve(roles.r);
    for (std::size_t i = 0; i < roles.r; ++i) {
        check(VertexRoles::entity_text(i));
        scores.push_back(tape.cosine(mention, tape.row(H, VertexRoles::entity_text(i))));
    }
    return tape.stack(scores);
}

template <typename T>
Var margin_loss(Tape<T>& tape, std::span<const ScoredMention> batch, T margin) {
    if (margin < T{0}) {
        throw ContractError("margin_loss: margin must be non-negative");
    }
    std::vector<Var> terms;
    for (const ScoredMention& m : batch) {
        const Tensor<T>& s = tape.value(m.scores);
        const std::size_t r = s.size();
        if (s.rank() != 1 || r < 2) {
            throw ContractError("margin_loss: each mention needs at least two candidates, got " + std::to_string(r));
        }
        if (m.gold >= r) {
            throw ContractError("margin_loss: gold index " + std::to_string(m.gold) + " out of range");
        }
        const Var pos = tape.pick(m.scores, m.gold);
        const Var neg = tape.scale(tape.sub(tape.sum(m.scores), pos), T{1} / static_cast<T>(r - 1));
        terms.push_back(tape.hinge(tape.add_scalar(tape.sub(neg, pos), margin)));
    }
    if (terms.empty()) {
        return tape.constant(Tensor<T>::scalar(T{0}));
    }
    return tape.sum(tape.stack(terms));
}

std::size_t argmax_first(std::span<const double> scores) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < scores.size(); ++i) {
        if (scores[i] > scores[best]) {
            best = i;
        }
    }
    return best;
}

std::size_t outranked_count(std::span<const double> scores, std::size_t gold) {
    std::size_t count = 0;
    for (double s : scores) {
        if (scores[gold] < s) {
            ++count;
        }
    }
    return count;
}

namespace {

void check_ks(std::span<const int> ks) {
    if (ks.empty()) {
        throw ContractError("top-K evaluation needs at least one K");
    }
    for (int k : ks) {
        if (k < 1) {
            throw ContractError("top-K: K must be at least 1, got " + std::to_string(k));
        }
    }
}

} // namespace

RankingResult make_ranking(std::string sample_id, std::vector<double> scores, std::size_t gold,
                           std::span<const int> ks) {
    check_ks(ks);
    if (gold >= scores.size()) {
        throw ContractError("make_ranking: gold index out of range for sample '" + sample_id + "'");
    }
    RankingResult r;
    r.sample_id = std::move(sample_id);
    r.predicted_index = argmax_first(scores);
    r.gold_index = gold;
    const std::size_t above = outranked_count(scores, gold);
    for (int k : ks) {
        r.topk_hits[k] = above < static_cast<std::size_t>(k);
    }
    r.scores = std::move(scores);
    return r;
}

std::map<int, double> topk_accuracy(std::span<const RankingResult> results, std::span<const int> ks) {
    check_ks(ks);
    std::map<int, double> out;
    std::vector<std::size_t> above;
    above.reserve(results.size());
    for (const RankingResult& r : results) {
        above.push_back(outranked_count(r.scores, r.gold_index));
    }
    for (int k : ks) {
        std::size_t hits = 0;
        for (std::size_t a : above) {
            hits += a < static_cast<std::size_t>(k) ? 1 : 0;
        }
        out[k] = results.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(results.size());
    }
    return out;
}

nlohmann::ordered_json metrics_json(const std::map<int, double>& metrics, std::span<const int> ks) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (int k : ks) {
        j["top" + std::to_string(k)] = metrics.at(k);
    }
    return j;
}

std::string metrics_table(const std::map<int, double>& metrics, std::span<const int> ks) {
    std::ostringstream head, body;
    char cell[32];
    for (int k : ks) {
        std::snprintf(cell, sizeof cell, "%9s", ("Top-" + std::to_string(k)).c_str());
        head << cell;
        std::snprintf(cell, sizeof cell, "%9.4f", metrics.at(k));
        body << cell;
    }
    return head.str() + "\n" + body.str() + "\n";
}

template Var score_candidates<float>(Tape<float>&, Var, const VertexRoles&);
template Var score_candidates<double>(Tape<double>&, Var, const VertexRoles&);
template Var margin_loss<float>(Tape<float>&, std::span<const ScoredMention>, float);
template Var margin_loss<double>(Tape<double>&, std::span<const ScoredMention>, double);

} // namespace drin
