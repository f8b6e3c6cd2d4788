// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <spdlog/spdlog.h>

#include "drin/cli.hpp"
#include "drin/gradcheck.hpp"
#include "drin/trainer.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

namespace {

using namespace drin;
using Clock = std::chrono::steady_clock;

struct Outcome {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

Outcome gradient_fidelity() {
    const GradCheckReport rep = run_gradcheck(GradCheckConfig{});
    const bool pass = rep.passed && rep.max_rel_error < 1e-4 && rep.seconds < 10.0;
    return {pass, fmt("max relative error %.3e over %zu tensors, %.2fs", rep.max_rel_error, rep.params.size(),
                      rep.seconds)};
}

Outcome residual_identity() {
    std::size_t checked = 0;
    for (Activation act : {Activation::tanh, Activation::leaky_relu}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            std::mt19937_64 rng(seed);
            const std::size_t r = 1 + seed % 8, d = 4 + seed % 13;
            const std::size_t n = VertexRoles{r}.n();
            const auto check = [&](auto tag) {
                using T = decltype(tag);
                Tape<T> tape;
                const Tensor<T> H = testutil::random_tensor<T>({n, d}, rng, -3.0, 3.0);
                const GcnLayerVars vars{tape.constant(testutil::random_tensor<T>({d, d}, rng)),
                                        tape.constant(testutil::random_tensor<T>({d, d}, rng))};
                const LayerOutput out = layer_forward(tape, tape.constant(H), tape.constant(Tensor<T>(Shape{n, n})),
                                                      relation_mask<T>(r), vars, act);
                return tape.value(out.H) == H;
            };
            if (!check(float{}) || !check(double{})) {
                return {false, fmt("vertex features changed (seed %llu)", static_cast<unsigned long long>(seed))};
            }
            checked += 2;
        }
    }
    return {true, fmt("%zu layers returned H bitwise unchanged", checked)};
}

Outcome mask_and_symmetry() {
    double worst_asym = 0.0;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
        std::mt19937_64 rng(1000 + seed);
        const std::size_t r = 1 + seed % 10, d = 3 + seed % 14, layers = 1 + seed % 4;
        const std::size_t n = VertexRoles{r}.n();
        const Tensor<float> M = relation_mask<float>(r);
        Tensor<float> A0 = testutil::random_tensor<float>({n, n}, rng);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) {
                A0(i, j) = i < j ? A0(i, j) * M(i, j) : A0(j, i) * M(i, j);
            }
        }
        Tape<float> tape;
        const Activation act = seed % 2 == 0 ? Activation::tanh : Activation::leaky_relu;
        GcnStack<float> stack = GcnStack<float>::init(layers, d, 1 + seed % 7, act, rng);
        const MentionGraph<float> g{tape.constant(testutil::random_tensor<float>({n, d}, rng)), tape.constant(A0), M,
                                    VertexRoles{r}};
        const auto vars = stack.bind(tape);
        std::vector<LayerOutput> trace;
        stack_forward(tape, g, vars, act, &trace);
        for (std::size_t l = 0; l < trace.size(); ++l) {
            const Tensor<float>& a = tape.value(trace[l].A);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t j = 0; j < n; ++j) {
                    if (M(i, j) == 0.0f && a(i, j) != 0.0f) {
                        return {false, fmt("entry (%zu,%zu) outside the mask is %g after layer %zu (seed %llu)", i, j,
                                           static_cast<double>(a(i, j)), l + 1,
                                           static_cast<unsigned long long>(seed))};
                    }
                    worst_asym = std::max(worst_asym, static_cast<double>(std::abs(a(i, j) - a(j, i))));
                }
            }
        }
    }
    return {worst_asym < 1e-6, fmt("200 graphs, masked entries exactly zero, max asymmetry %.3e", worst_asym)};
}

Outcome permutation_equivariance() {
    ModelShape shape;
    shape.hidden_dim = 16;
    shape.edge_dim = 16;
    std::mt19937_64 init(3);
    const ModelParams<double> m64 = ModelParams<double>::init(shape, init);
    init.seed(3);
    const ModelParams<float> m32 = ModelParams<float>::init(shape, init);

    double worst32 = 0.0;
    for (std::uint64_t trial = 0; trial < 50; ++trial) {
        SynthConfig sc;
        sc.num_samples = 1;
        sc.r = 2 + trial % 9;
        sc.k = trial % 4;
        sc.seed = 500 + trial;
        const MentionRecord rec = generate_synthetic(sc).records.front();
        std::vector<std::size_t> perm(sc.r);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::mt19937_64 rng(trial);
        std::shuffle(perm.begin(), perm.end(), rng);
        MentionRecord shuffled = rec;
        for (std::size_t i = 0; i < sc.r; ++i) {
            shuffled.candidates[i] = rec.candidates[perm[i]];
            if (perm[i] == rec.gold_index) {
                shuffled.gold_index = i;
            }
        }
        const auto a64 = score_record(rec, m64);
        const auto b64 = score_record(shuffled, m64);
        const auto a32 = score_record(rec, m32);
        const auto b32 = score_record(shuffled, m32);
        for (std::size_t i = 0; i < sc.r; ++i) {
            if (b64[i] != a64[perm[i]]) {
                return {false, fmt("64-bit score differs at trial %llu: %.17g vs %.17g",
                                   static_cast<unsigned long long>(trial), b64[i], a64[perm[i]])};
            }
            worst32 = std::max(worst32, std::abs(b32[i] - a32[perm[i]]));
        }
    }
    return {worst32 <= 1e-6, fmt("50 trials, 64-bit exact, 32-bit max deviation %.3e", worst32)};
}

Outcome metric_oracle() {
    std::mt19937_64 rng(17);
    const std::vector<int> ks{1, 2, 3, 5, 10, 20};
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<RankingResult> all;
    std::vector<std::vector<double>> scores;
    std::vector<std::size_t> gold;
    std::size_t ties = 0;
    for (int v = 0; v < 1000; ++v) {
        const std::size_t r = 1 + rng() % 25;
        std::vector<double> s(r);
        const int mode = v % 4;
        for (double& x : s) {
            x = mode == 0 ? 0.25 : mode == 1 ? std::round(u(rng) * 3.0) / 3.0 : u(rng);
        }
        ties += mode == 0 ? 1 : 0;
        const std::size_t g = rng() % r;
        const RankingResult res = make_ranking("v" + std::to_string(v), s, g, ks);
        const auto one = topk_accuracy(std::span(&res, 1), ks);
        for (int k : ks) {
            const double want = oracle::topk_iverson({s}, {g}, k);
            if (one.at(k) != want) {
                return {false, fmt("vector %d, K=%d: got %g, brute force %g", v, k, one.at(k), want)};
            }
        }
        for (std::size_t i = 1; i < ks.size(); ++i) {
            if (one.at(ks[i - 1]) > one.at(ks[i])) {
                return {false, fmt("vector %d: Top-%d exceeds Top-%d", v, ks[i - 1], ks[i])};
            }
        }
        all.push_back(res);
        scores.push_back(s);
        gold.push_back(g);
    }
    const auto agg = topk_accuracy(all, ks);
    for (int k : ks) {
        if (std::abs(agg.at(k) - oracle::topk_iverson(scores, gold, k)) > 1e-12) {
            return {false, fmt("aggregate Top-%d disagrees with brute force", k)};
        }
    }
    for (std::size_t i = 1; i < ks.size(); ++i) {
        if (agg.at(ks[i - 1]) > agg.at(ks[i])) {
            return {false, "aggregate accuracy not monotone in K"};
        }
    }
    return {true, fmt("1000 vectors (%zu all-tie), per-vector and aggregate agree; monotone in K", ties)};
}

Outcome loss_oracle() {
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    double worst = 0.0;
    std::size_t zero_cases = 0;
    for (int batch_no = 0; batch_no < 300; ++batch_no) {
        const std::size_t batch = 1 + rng() % 8;
        const double margin = (batch_no % 6) * 0.1;
        std::vector<std::vector<double>> scores;
        std::vector<std::size_t> gold;
        Tape<double> t64;
        Tape<float> t32;
        std::vector<ScoredMention> b64, b32;
        bool all_clear = true;
        for (std::size_t m = 0; m < batch; ++m) {
            const std::size_t r = 2 + rng() % 9;
            std::vector<double> s(r);
            for (double& x : s) {
                // dyadic grid so exact boundary cases occur
                x = batch_no % 3 == 0 ? std::round(u(rng) * 8.0) / 8.0 : u(rng);
            }
            const std::size_t g = rng() % r;
            if (batch_no % 5 == 0) {
                s[g] = 1.0; // push some batches into the zero-loss region
            }
            double neg = 0.0;
            for (std::size_t i = 0; i < r; ++i) {
                neg += i == g ? 0.0 : s[i];
            }
            neg /= static_cast<double>(r - 1);
            all_clear = all_clear && s[g] >= neg + margin;
            std::vector<float> sf(s.begin(), s.end());
            b64.push_back({t64.constant(Tensor<double>({r}, s)), g});
            b32.push_back({t32.constant(Tensor<float>({r}, sf)), g});
            scores.push_back(s);
            gold.push_back(g);
        }
        const double want = oracle::margin_loss(scores, gold, margin);
        const double got64 = t64.value(margin_loss<double>(t64, b64, margin)).item();
        const double got32 = t32.value(margin_loss<float>(t32, b32, static_cast<float>(margin))).item();
        worst = std::max({worst, std::abs(got64 - want), std::abs(got32 - want)});
        if ((got64 == 0.0) != all_clear) {
            return {false, fmt("batch %d: loss %.17g but all-clear is %d", batch_no, got64, all_clear ? 1 : 0)};
        }
        zero_cases += all_clear ? 1 : 0;
    }
    return {worst < 1e-6, fmt("300 batches, max deviation %.3e, %zu zero-loss batches matched", worst, zero_cases)};
}

Outcome edge_oracles() {
    double worst_vv = 0.0, worst_tt = 0.0;
    std::size_t pairs = 0;
    for (std::size_t k : {0u, 1u, 2u, 5u}) {
        for (std::uint64_t seed = 0; seed < 25; ++seed) {
            SynthConfig sc;
            sc.num_samples = 1;
            sc.r = 4;
            sc.k = k;
            sc.seed = 900 + seed;
            sc.latent_dim = seed % 2 == 0 ? 0 : 16;
            MentionRecord rec = generate_synthetic(sc).records.front();
            if (k > 1 && seed % 3 == 0) {
                rec.candidates[0].objects.pop_back(); // unequal region counts
            }
            for (const CandidateRecord& c : rec.candidates) {
                worst_vv = std::max(worst_vv, std::abs(edge_vv(rec.objects, c.objects) -
                                                       oracle::edge_vv(rec.objects, c.objects)));
                worst_tt = std::max(worst_tt, std::abs(edge_tt(rec.cls_vec, c.cls_vec) -
                                                       oracle::cosine(oracle::widen(rec.cls_vec),
                                                                      oracle::widen(c.cls_vec))));
                ++pairs;
            }
        }
    }
    return {worst_vv < 1e-6 && worst_tt < 1e-12,
            fmt("%zu pairs, region edge max deviation %.3e, text edge max deviation %.3e", pairs, worst_vv, worst_tt)};
}

TrainConfig convergence_config() {
    TrainConfig c;
    c.hidden_dim = 32;
    c.gcn_layers = 2;
    c.epochs = 30;
    c.seed = 42;
    c.ks = {1, 5};
    return c;
}

Outcome synthetic_convergence() {
    SynthConfig sc;
    sc.num_samples = 500;
    sc.r = 8;
    sc.signal_strength = 0.9;
    sc.seed = 42;
    const Bundle bundle = generate_synthetic(sc);
    auto start = Clock::now();
    const auto run = train<float>(bundle, convergence_config());
    const double secs = seconds_since(start);

    double best = 0.0;
    std::size_t best_epoch = 0, first_epoch = 0;
    for (const EpochLog& log : run.log) {
        const double top1 = log.val_metrics.at(1);
        if (top1 > best) {
            best = top1;
            best_epoch = log.epoch;
        }
        if (first_epoch == 0 && top1 >= 0.95) {
            first_epoch = log.epoch;
        }
    }
    const double final_top1 = run.log.back().val_metrics.at(1);
    const std::size_t n_val = run.log.back().val_count;

    sc.signal_strength = 0.0;
    const Bundle noise = generate_synthetic(sc);
    start = Clock::now();
    const auto null_run = train<float>(noise, convergence_config());
    const double null_secs = seconds_since(start);
    const double null_top1 = null_run.log.back().val_metrics.at(1);
    const double p = 1.0 / 8.0;
    const double sigma = std::sqrt(p * (1.0 - p) / static_cast<double>(n_val));
    const bool null_ok = std::abs(null_top1 - p) <= 3.0 * sigma;

    const bool pass = first_epoch > 0 && secs < 120.0 && null_ok && null_secs < 120.0;
    return {pass, fmt("signal 0.9: val Top-1 reached %.3f at epoch %zu (first >= 0.95 at epoch %zu, final %.3f, "
                      "%zu val mentions, %.1fs); signal 0.0: final %.3f vs %.3f +- %.3f (%.1fs)",
                      best, best_epoch, first_epoch, final_top1, n_val, secs, null_top1, p, 3.0 * sigma, null_secs)};
}

Outcome determinism_and_persistence() {
    SynthConfig sc;
    sc.num_samples = 80;
    sc.r = 5;
    sc.seed = 8;
    const Bundle b = generate_synthetic(sc);
    TrainConfig c;
    c.hidden_dim = 16;
    c.epochs = 3;
    c.seed = 11;
    const auto r1 = train<float>(b, c);
    const auto r2 = train<float>(b, c);
    for (std::size_t e = 0; e < r1.log.size(); ++e) {
        if (r1.log[e].val_metrics != r2.log[e].val_metrics || r1.log[e].train_loss != r2.log[e].train_loss) {
            return {false, fmt("epoch %zu metrics differ between identical runs", e + 1)};
        }
    }
    const EvalReport e1 = evaluate<float>(b.records, r1.state.model, c.ks);
    const EvalReport e2 = evaluate<float>(b.records, r2.state.model, c.ks);
    if (e1.metrics != e2.metrics) {
        return {false, "evaluation metrics differ between identical runs"};
    }

    testutil::TempDir dir("accept_ckpt");
    save_checkpoint(r1.state, dir / "ckpt");
    const TrainState<float> back = load_checkpoint<float>(dir / "ckpt");
    const EvalReport e3 = evaluate<float>(b.records, back.model, c.ks);
    for (std::size_t i = 0; i < e1.rankings.size(); ++i) {
        if (e1.rankings[i].scores != e3.rankings[i].scores) {
            return {false, "scores after checkpoint reload differ for " + e1.rankings[i].sample_id};
        }
    }

    write_bundle(b, dir / "bundle");
    auto cli_eval = [&](const std::string& ckpt) {
        std::ostringstream out, err;
        const int code = cli::run({"eval", "--bundle", (dir / "bundle").string(), "--checkpoint", ckpt}, out, err);
        return std::to_string(code) + out.str();
    };
    save_checkpoint(back, dir / "ckpt2");
    const std::string o1 = cli_eval((dir / "ckpt").string());
    const std::string o2 = cli_eval((dir / "ckpt2").string());
    if (o1 != o2 || o1.rfind("0", 0) != 0) {
        return {false, "CLI evaluation output differs after save/load"};
    }
    return {e1.metrics == e3.metrics, fmt("3 epochs twice: identical metrics; reload gives identical scores for %zu "
                                          "mentions and identical CLI output",
                                          e1.rankings.size())};
}

Outcome layer_sweep_shape() {
    testutil::TempDir dir("accept_sweep");
    std::ostringstream out, err;
    int code = cli::run({"synth", "--out", (dir / "b").string(), "--samples", "120", "--r", "6", "--seed", "4"}, out,
                        err);
    if (code != 0) {
        return {false, "synth failed: " + err.str()};
    }
    out.str("");
    code = cli::run({"sweep", "--bundle", (dir / "b").string(), "--layers", "1,2,3,4,5", "--d", "16", "--epochs",
                     "2", "--ks", "1,3,5"},
                    out, err);
    if (code != 0) {
        return {false, "sweep exited " + std::to_string(code) + ": " + err.str()};
    }
    std::istringstream in(out.str());
    std::string line;
    std::getline(in, line);
    if (line.find("Top-1") == std::string::npos || line.find("Top-5") == std::string::npos) {
        return {false, "missing header: " + line};
    }
    std::size_t rows = 0;
    while (std::getline(in, line)) {
        std::istringstream cells(line);
        std::size_t layers = 0;
        double t1 = 0, t3 = 0, t5 = 0;
        if (!(cells >> layers >> t1 >> t3 >> t5)) {
            return {false, "unparseable row: " + line};
        }
        if (layers != rows + 1 || !(t1 <= t3 && t3 <= t5)) {
            return {false, "row violates layer order or K monotonicity: " + line};
        }
        ++rows;
    }
    return {rows == 5, fmt("%zu rows, each monotone in K", rows)};
}

template <typename T>
double gcn_step_seconds(std::size_t r, std::size_t d, std::size_t layers, int reps) {
    std::mt19937_64 rng(31);
    const std::size_t n = VertexRoles{r}.n();
    GcnStack<T> stack = GcnStack<T>::init(layers, d, d, Activation::tanh, rng);
    const Tensor<T> H = testutil::random_tensor<T>({n, d}, rng);
    const Tensor<T> M = relation_mask<T>(r);
    Tensor<T> A = testutil::random_tensor<T>({n, n}, rng);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            A(i, j) = i < j ? A(i, j) * M(i, j) : A(j, i) * M(i, j);
        }
    }
    double best = 1e9;
    for (int rep = 0; rep < reps; ++rep) {
        const auto start = Clock::now();
        Tape<T> tape;
        const MentionGraph<T> g{tape.leaf(H), tape.constant(A), M, VertexRoles{r}};
        const auto vars = stack.bind(tape);
        const LayerOutput out = stack_forward(tape, g, vars, stack.activation);
        tape.backward(tape.sum(out.H));
        best = std::min(best, seconds_since(start));
    }
    return best;
}

Outcome cost_model() {
    const std::size_t d = 256, layers = 2;
    gcn_step_seconds<float>(8, d, layers, 3); // warm-up
    const double t8 = gcn_step_seconds<float>(8, d, layers, 40);
    const double t16 = gcn_step_seconds<float>(16, d, layers, 40);
    const double ratio = t16 / t8;
    return {ratio >= 1.3 && ratio <= 3.0,
            fmt("d=%zu L=%zu: r=8 %.3f ms, r=16 %.3f ms, ratio %.2f (linear prediction %.2f)", d, layers, t8 * 1e3,
                t16 * 1e3, ratio, static_cast<double>(VertexRoles{16}.n()) / VertexRoles{8}.n())};
}

} // namespace

int main() {
    spdlog::set_level(spdlog::level::warn);
    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"gradient fidelity", gradient_fidelity},
        {"residual identity", residual_identity},
        {"mask and symmetry preservation", mask_and_symmetry},
        {"candidate permutation equivariance", permutation_equivariance},
        {"metric oracle", metric_oracle},
        {"loss oracle", loss_oracle},
        {"edge formula oracles", edge_oracles},
        {"synthetic convergence", synthetic_convergence},
        {"determinism and persistence", determinism_and_persistence},
        {"layer sweep shape", layer_sweep_shape},
        {"cost model sanity", cost_model},
    };
    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        const auto start = Clock::now();
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("threw: ") + e.what()};
        }
        failures += o.pass ? 0 : 1;
        std::printf("%s criterion %zu (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first,
                    o.detail.c_str(), seconds_since(start));
        std::fflush(stdout);
    }
    std::printf("%d of %zu criteria failed\n", failures, criteria.size());
    return failures == 0 ? 0 : 1;
}
