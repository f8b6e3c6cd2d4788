#include "drin/cli.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <numeric>
#include <optional>

#include <CLI11.hpp>
#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include "drin/bundle.hpp"
#include "drin/config.hpp"
#include "drin/error.hpp"
#include "drin/gradcheck.hpp"
#include "drin/trainer.hpp"

namespace drin::cli {

namespace fs = std::filesystem;

namespace {

/// Flags shared by train and sweep that end up in TrainConfig.
struct ConfigFlags {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> epochs;
    std::optional<std::size_t> hidden_dim;
    std::string ks;
    std::optional<std::size_t> jobs;

    void attach(CLI::App& app) {
        app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
        app.add_option("--set", overrides, "config override key=value (repeatable)");
        app.add_option("--seed", seed, "random seed");
        app.add_option("--epochs", epochs, "training epochs");
        app.add_option("--d", hidden_dim, "vertex feature dimension");
        app.add_option("--ks", ks, "comma-separated Top-K cut-offs");
        app.add_option("--jobs", jobs, "evaluation threads");
    }

    TrainConfig resolve() const {
        TrainConfig c = config_path.empty() ? TrainConfig{} : load_config(config_path);
        for (const std::string& o : overrides) {
            apply_override(c, o);
        }
        if (seed) c.seed = *seed;
        if (epochs) c.epochs = *epochs;
        if (hidden_dim) c.hidden_dim = *hidden_dim;
        if (!ks.empty()) c.ks = parse_int_list(ks);
        if (jobs) c.jobs = *jobs;
        validate(c);
        return c;
    }
};

std::string key_footer() {
    std::string s = "Config keys (--config FILE or --set key=value):\n";
    char line[256];
    for (const ConfigKeyDoc& d : config_key_docs()) {
        std::snprintf(line, sizeof line, "  %-14s %-16s %s\n", d.key.c_str(), d.default_value.c_str(),
                      d.description.c_str());
        s += line;
    }
    s += "\nEnvironment: DRIN_LOG=trace|debug|info|warn|error|off sets log verbosity (default warn).\n";
    s += "Exit status: 0 success, 1 invalid input or config, 2 runtime failure.\n";
    return s;
}

/// Routes the default logger to `err` until destroyed.
class ScopedLogging {
public:
    explicit ScopedLogging(std::ostream& err) : previous_(spdlog::default_logger()) { install(err); }
    ~ScopedLogging() { spdlog::set_default_logger(previous_); }
    ScopedLogging(const ScopedLogging&) = delete;
    ScopedLogging& operator=(const ScopedLogging&) = delete;

private:
    static void install(std::ostream& err);
    std::shared_ptr<spdlog::logger> previous_;
};

void ScopedLogging::install(std::ostream& err) {
    auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err, true);
    auto logger = std::make_shared<spdlog::logger>("drin", sink);
    logger->set_pattern("[%l] %v");
    spdlog::level::level_enum level = spdlog::level::warn;
    if (const char* env = std::getenv("DRIN_LOG"); env != nullptr && *env != '\0') {
        level = spdlog::level::from_str(env);
    }
    logger->set_level(level);
    spdlog::set_default_logger(logger);
}

void print_epoch(std::ostream& out, const EpochLog& log, std::span<const int> ks) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "epoch %3zu  loss %.6f", log.epoch, log.train_loss);
    out << buf;
    for (int k : ks) {
        const auto it = log.val_metrics.find(k);
        if (it != log.val_metrics.end()) {
            std::snprintf(buf, sizeof buf, "  top%d %.4f", k, it->second);
            out << buf;
        }
    }
    out << '\n';
}

int cmd_synth(const SynthConfig& sc, const std::string& out_dir, std::ostream& out) {
    const Bundle b = generate_synthetic(sc);
    write_bundle(b, out_dir);
    out << "wrote " << b.records.size() << " samples to " << out_dir << '\n';
    return kExitOk;
}

int cmd_train(const std::string& bundle_path, const std::string& out_dir, std::optional<std::size_t> layers,
              const ConfigFlags& flags, std::ostream& out) {
    TrainConfig cfg = flags.resolve();
    if (layers) {
        cfg.gcn_layers = *layers;
        validate(cfg);
    }
    const Bundle bundle = read_bundle(bundle_path);
    TrainOptions opts;
    if (!out_dir.empty()) {
        opts.out_dir = fs::path(out_dir);
    }
    opts.on_epoch = [&](const EpochLog& log) { print_epoch(out, log, cfg.ks); };
    return with_precision(cfg.precision, [&](auto tag) {
        using T = decltype(tag);
        const TrainResult<T> res = train<T>(bundle, cfg, opts);
        const EpochLog& last = res.log.back();
        if (!last.val_metrics.empty()) {
            out << "validation (" << last.val_count << " mentions)\n" << metrics_table(last.val_metrics, cfg.ks);
        }
        if (opts.out_dir) {
            out << "checkpoint: " << (*opts.out_dir / "checkpoint").string() << '\n';
        }
        return kExitOk;
    });
}

template <typename Fn>
int with_checkpoint(const std::string& ckpt, Fn&& fn) {
    return with_precision(checkpoint_precision(ckpt), [&](auto tag) {
        using T = decltype(tag);
        const TrainState<T> st = load_checkpoint<T>(ckpt);
        return fn(st);
    });
}

int cmd_eval(const std::string& bundle_path, const std::string& ckpt, const std::string& ks_text,
             std::optional<std::size_t> jobs, std::ostream& out) {
    const Bundle bundle = read_bundle(bundle_path);
    return with_checkpoint(ckpt, [&](const auto& st) {
        check_compatible(st.model.shape(), bundle.header);
        const std::vector<int> ks = ks_text.empty() ? st.config.ks : parse_int_list(ks_text);
        for (int k : ks) {
            if (k < 1) {
                throw ConfigError("every K must be at least 1");
            }
        }
        const EvalReport rep = evaluate(bundle.records, st.model, ks, jobs.value_or(st.config.jobs));
        out << "evaluated " << rep.rankings.size() << " mentions\n" << metrics_table(rep.metrics, ks);
        return kExitOk;
    });
}

int cmd_rank(const std::string& bundle_path, const std::string& ckpt, std::optional<std::size_t> jobs,
             std::ostream& out) {
    const Bundle bundle = read_bundle(bundle_path);
    return with_checkpoint(ckpt, [&](const auto& st) {
        check_compatible(st.model.shape(), bundle.header);
        const std::vector<int> ks{1};
        const EvalReport rep = evaluate(bundle.records, st.model, ks, jobs.value_or(st.config.jobs));
        char buf[64];
        for (std::size_t m = 0; m < rep.rankings.size(); ++m) {
            const RankingResult& r = rep.rankings[m];
            const MentionRecord& rec = bundle.records[m];
            out << r.sample_id << '\n';
            std::vector<std::size_t> order(r.scores.size());
            std::iota(order.begin(), order.end(), std::size_t{0});
            std::stable_sort(order.begin(), order.end(),
                             [&](std::size_t a, std::size_t b) { return r.scores[a] > r.scores[b]; });
            for (std::size_t pos = 0; pos < order.size(); ++pos) {
                const std::size_t i = order[pos];
                std::snprintf(buf, sizeof buf, "  %3zu  %+.6f  ", pos + 1, r.scores[i]);
                out << buf << rec.candidates[i].entity_id << (i == r.gold_index ? "  gold" : "") << '\n';
            }
        }
        return kExitOk;
    });
}

int cmd_gradcheck(const GradCheckConfig& gc, std::ostream& out) {
    const GradCheckReport rep = run_gradcheck(gc);
    char buf[160];
    for (const ParamGradError& p : rep.params) {
        std::snprintf(buf, sizeof buf, "%-28s %8zu  max rel err %.3e\n", p.name.c_str(), p.count, p.max_rel_error);
        out << buf;
    }
    std::snprintf(buf, sizeof buf, "max relative error: %.3e (tolerance %.1e, %.2fs) %s\n", rep.max_rel_error,
                  gc.tolerance, rep.seconds, rep.passed ? "PASS" : "FAIL");
    out << buf;
    return rep.passed ? kExitOk : kExitRuntime;
}

int cmd_sweep(const std::string& bundle_path, const std::string& layers_text, std::optional<std::size_t> runs,
              const ConfigFlags& flags, std::ostream& out) {
    TrainConfig cfg = flags.resolve();
    if (runs) {
        cfg.runs = *runs;
        validate(cfg);
    }
    std::vector<std::size_t> layers;
    for (int l : parse_int_list(layers_text)) {
        if (l < 1) {
            throw ConfigError("layer counts must be at least 1");
        }
        layers.push_back(static_cast<std::size_t>(l));
    }
    const Bundle bundle = read_bundle(bundle_path);
    const std::vector<SweepRow> rows = with_precision(cfg.precision, [&](auto tag) {
        return layer_sweep<decltype(tag)>(bundle, cfg, layers);
    });
    out << sweep_table(rows, cfg.ks);
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    const ScopedLogging logging(err);

    CLI::App app{"drin: multimodal entity-linking ranker over dynamic relation graphs", "drin"};
    app.require_subcommand(1);
    app.footer(key_footer());

    std::string bundle_path;
    std::string out_dir;
    std::string ckpt;
    std::string ks_text;
    std::optional<std::size_t> jobs;
    std::optional<std::size_t> layers;
    std::optional<std::size_t> runs;
    std::string layers_text = "1,2,3,4,5";
    ConfigFlags train_flags;
    ConfigFlags sweep_flags;
    SynthConfig synth;
    GradCheckConfig grad;

    CLI::App* train_cmd = app.add_subcommand("train", "train a ranker on a bundle");
    train_cmd->add_option("--bundle", bundle_path, "bundle directory")->required();
    train_cmd->add_option("--out", out_dir, "run directory for checkpoint and metrics.jsonl");
    train_cmd->add_option("--layers", layers, "number of GCN layers");
    train_flags.attach(*train_cmd);

    CLI::App* eval_cmd = app.add_subcommand("eval", "Top-K accuracy of a checkpoint on a bundle");
    eval_cmd->add_option("--bundle", bundle_path, "bundle directory")->required();
    eval_cmd->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
    eval_cmd->add_option("--ks", ks_text, "comma-separated Top-K cut-offs");
    eval_cmd->add_option("--jobs", jobs, "evaluation threads");

    CLI::App* rank_cmd = app.add_subcommand("rank", "print candidate rankings per mention");
    rank_cmd->add_option("--bundle", bundle_path, "bundle directory")->required();
    rank_cmd->add_option("--checkpoint", ckpt, "checkpoint directory")->required();
    rank_cmd->add_option("--jobs", jobs, "evaluation threads");

    CLI::App* grad_cmd = app.add_subcommand("gradcheck", "finite-difference check of every parameter gradient");
    grad_cmd->add_option("--d", grad.hidden_dim, "vertex feature dimension")->capture_default_str();
    grad_cmd->add_option("--r", grad.r, "candidates per mention")->capture_default_str();
    grad_cmd->add_option("--layers", grad.layers, "number of GCN layers")->capture_default_str();
    grad_cmd->add_option("--k", grad.k, "object regions per image")->capture_default_str();
    grad_cmd->add_option("--seed", grad.seed, "random seed")->capture_default_str();
    grad_cmd->add_option("--step", grad.step, "central-difference step")->capture_default_str();
    grad_cmd->add_option("--tolerance", grad.tolerance, "maximum relative error")->capture_default_str();
    grad_cmd->add_option("--text-dim", grad.text_dim, "text feature width")->capture_default_str();
    grad_cmd->add_option("--image-dim", grad.image_dim, "image feature width")->capture_default_str();
    std::string grad_act = "tanh";
    grad_cmd->add_option("--activation", grad_act, "tanh or leaky_relu")->capture_default_str();

    CLI::App* synth_cmd = app.add_subcommand("synth", "write a synthetic bundle with a planted gold candidate");
    synth_cmd->add_option("--out", out_dir, "bundle directory")->required();
    synth_cmd->add_option("--samples", synth.num_samples, "number of mentions")->capture_default_str();
    synth_cmd->add_option("--r", synth.r, "candidates per mention")->capture_default_str();
    synth_cmd->add_option("--k", synth.k, "object regions per image")->capture_default_str();
    synth_cmd->add_option("--signal", synth.signal_strength, "planted signal strength in [0, 1]")
        ->capture_default_str();
    synth_cmd->add_option("--seed", synth.seed, "random seed")->capture_default_str();
    synth_cmd->add_option("--text-dim", synth.text_dim, "text feature width")->capture_default_str();
    synth_cmd->add_option("--image-dim", synth.image_dim, "image feature width")->capture_default_str();
    synth_cmd->add_option("--object-dim", synth.object_dim, "object region width")->capture_default_str();
    synth_cmd->add_option("--latent-dim", synth.latent_dim, "rank of each modality's feature space (0 = full width)")
        ->capture_default_str();

    CLI::App* sweep_cmd = app.add_subcommand("sweep", "train once per layer count and tabulate validation Top-K");
    sweep_cmd->add_option("--bundle", bundle_path, "bundle directory")->required();
    sweep_cmd->add_option("--layers", layers_text, "comma-separated layer counts")->capture_default_str();
    sweep_cmd->add_option("--runs", runs, "repetitions per layer count");
    sweep_flags.attach(*sweep_cmd);

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        if (!app.get_subcommands().empty()) {
            err << "run with --help for usage\n";
        }
        return kExitInvalid;
    }

    try {
        if (train_cmd->parsed()) {
            return cmd_train(bundle_path, out_dir, layers, train_flags, out);
        }
        if (eval_cmd->parsed()) {
            return cmd_eval(bundle_path, ckpt, ks_text, jobs, out);
        }
        if (rank_cmd->parsed()) {
            return cmd_rank(bundle_path, ckpt, jobs, out);
        }
        if (grad_cmd->parsed()) {
            grad.activation = parse_activation(grad_act);
            return cmd_gradcheck(grad, out);
        }
        if (synth_cmd->parsed()) {
            return cmd_synth(synth, out_dir, out);
        }
        if (sweep_cmd->parsed()) {
            return cmd_sweep(bundle_path, layers_text, runs, sweep_flags, out);
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const ConfigError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const FormatError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const ContractError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const ShapeError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitRuntime;
    }
    return kExitInvalid;
}

} // namespace drin::cli
