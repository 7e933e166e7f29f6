#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "mflab/descent.hpp"
#include "mflab/diagnostics.hpp"
#include "mflab/factorization.hpp"
#include "mflab/guess_check.hpp"
#include "mflab/harness.hpp"
#include "mflab/problem.hpp"

namespace {

using namespace mflab;

constexpr int kExitOk = 0;
constexpr int kExitFatal = 1;
constexpr int kExitFlagged = 2;  // handled per-cell failures (zero acceptance, divergence)

struct InstanceOptions {
    std::string file;
    int m = 5, m_prime = 5, r = 1, n = 15;
    double b = 1.0;
    std::string kind = "gaussian";
    std::uint64_t seed = 0;

    void attach(CLI::App* cmd) {
        cmd->add_option("--instance", file, "Load a problem instance from a JSON file");
        cmd->add_option("--m", m, "Ground truth rows");
        cmd->add_option("--m-prime", m_prime, "Ground truth columns");
        cmd->add_option("--r", r, "Ground truth rank");
        cmd->add_option("--b", b, "Ground truth Frobenius norm");
        cmd->add_option("--n", n, "Number of measurements");
        cmd->add_option("--kind", kind, "Measurement kind: gaussian|indicator");
        cmd->add_option("--instance-seed", seed, "Instance generation seed");
    }

    ProblemInstance resolve() const {
        if (!file.empty()) {
            std::ifstream in(file);
            if (!in) throw std::runtime_error("cannot open instance file: " + file);
            std::stringstream buf;
            buf << in.rdbuf();
            return instance_from_json(buf.str());
        }
        return make_instance(m, m_prime, r, b, n, measurement_kind_from_string(kind), seed);
    }
};

struct SpecOptions {
    int depth = 2, width = 5;
    std::string activation = "linear";
    double slope = 0.2;
    bool f32 = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--depth", depth, "Factorization depth (>= 2)");
        cmd->add_option("--width", width, "Factorization width");
        cmd->add_option("--activation", activation, "linear|tanh|leaky_relu");
        cmd->add_option("--slope", slope, "Leaky ReLU negative slope");
        cmd->add_flag("--f32", f32, "Use the f32 fast path where supported");
    }

    FactorizationSpec resolve(const ProblemInstance& inst) const {
        FactorizationSpec spec;
        spec.depth = depth;
        spec.width = width;
        spec.out_dim = inst.meta.m;
        spec.in_dim = inst.meta.m_prime;
        spec.activation.kind = activation_kind_from_string(activation);
        spec.activation.slope = slope;
        spec.precision = f32 ? Precision::f32 : Precision::f64;
        spec.validate();
        return spec;
    }
};

struct PriorOptions {
    std::string base = "gaussian";
    double param = 1.0;
    bool normalize = false;

    void attach(CLI::App* cmd) {
        cmd->add_option("--prior", base, "Prior base distribution: gaussian|uniform");
        cmd->add_option("--prior-param", param,
                        "Gaussian variance or uniform bound of the base distribution");
        cmd->add_flag("--normalize", normalize, "Normalize the prior's linear product");
    }

    PriorSpec resolve() const {
        PriorSpec prior;
        if (base == "gaussian")
            prior.base = BaseKind::gaussian;
        else if (base == "uniform")
            prior.base = BaseKind::uniform;
        else
            throw std::runtime_error("unknown prior base: " + base);
        prior.param = param;
        prior.normalize = normalize;
        return prior;
    }
};

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write: " + path);
    out << text;
}

std::string read_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open: " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Matrix sensing via deep factorization: Guess & Check vs gradient descent"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 0;
    bool verbose = false;
    app.add_option("--seed", seed, "Master seed");
    app.add_option("--threads", threads, "Worker threads (0 = hardware)");
    app.add_flag("--verbose", verbose, "Progress telemetry on stderr");

    // gen
    auto* gen = app.add_subcommand("gen", "Generate a problem instance as JSON");
    InstanceOptions gen_inst;
    gen_inst.attach(gen);
    std::string gen_out = "-";
    gen->add_option("--out", gen_out, "Output file (default stdout)");

    // gnc
    auto* gnc = app.add_subcommand("gnc", "Run the Guess & Check sampler once");
    InstanceOptions gnc_inst;
    SpecOptions gnc_spec;
    PriorOptions gnc_prior;
    gnc_inst.attach(gnc);
    gnc_spec.attach(gnc);
    gnc_prior.attach(gnc);
    double gnc_eps = 0.02;
    std::uint64_t gnc_samples = 1000000, gnc_batch = 8192;
    std::string gnc_out = "-";
    gnc->add_option("--eps-train", gnc_eps, "Acceptance threshold on the training loss");
    gnc->add_option("--samples", gnc_samples, "Total draws");
    gnc->add_option("--batch-size", gnc_batch, "Execution batch size");
    gnc->add_option("--out", gnc_out, "Report JSON output (default stdout)");

    // gd
    auto* gd = app.add_subcommand("gd", "Run gradient descent once");
    InstanceOptions gd_inst;
    SpecOptions gd_spec;
    gd_inst.attach(gd);
    gd_spec.attach(gd);
    GdConfig gd_cfg;
    bool gd_fixed_lr = false;
    std::string gd_trace;
    gd->add_option("--lr", gd_cfg.base_lr, "Base learning rate");
    gd->add_option("--epochs", gd_cfg.epochs, "Number of epochs");
    gd->add_option("--init-scale", gd_cfg.init_scale, "Initialization scale");
    gd->add_option("--momentum", gd_cfg.momentum, "Momentum coefficient in [0, 1)");
    gd->add_flag("--fixed-lr", gd_fixed_lr, "Disable the adaptive step-size scheme");
    gd->add_flag("--per-layer-ema", gd_cfg.per_layer_ema,
                 "Adapt per layer instead of globally");
    gd->add_option("--record-every", gd_cfg.record_every, "Trace recording stride");
    gd->add_option("--trace", gd_trace, "Write the trace CSV to this file");

    // prior
    auto* prior_cmd = app.add_subcommand("prior", "Draw prior baselines");
    InstanceOptions prior_inst;
    SpecOptions prior_spec;
    PriorOptions prior_prior;
    prior_inst.attach(prior_cmd);
    prior_spec.attach(prior_cmd);
    prior_prior.attach(prior_cmd);
    int prior_trials = 8;
    std::string prior_out = "-";
    prior_cmd->add_option("--trials", prior_trials, "Number of independent draws");
    prior_cmd->add_option("--out", prior_out, "Output CSV (default stdout)");

    // sweep
    auto* sweep = app.add_subcommand("sweep", "Run a preset experiment sweep");
    std::string sweep_preset, sweep_out_dir = ".";
    bool sweep_desk = false, sweep_list = false;
    std::uint64_t sweep_samples = 0;
    int sweep_trials = 0;
    sweep->add_option("--preset", sweep_preset, "Preset name (see --list)");
    sweep->add_flag("--desk-scale", sweep_desk, "Reduce grids and draw counts for a desk run");
    sweep->add_option("--out", sweep_out_dir, "Output directory");
    sweep->add_flag("--list", sweep_list, "List available presets");
    sweep->add_option("--samples", sweep_samples, "Override G&C samples per cell");
    sweep->add_option("--trials", sweep_trials, "Override the trial count");
    int sweep_gd_cap = -1;
    sweep->add_option("--gd-axis-cap", sweep_gd_cap,
                      "Skip GD cells above this axis value (0 disables the cap)");

    // diag
    auto* diag = app.add_subcommand("diag", "Mechanism probes");
    diag->require_subcommand(1);
    auto* indep = diag->add_subcommand("independence",
                                       "Train/generalization event independence probe");
    InstanceOptions ind_inst;
    SpecOptions ind_spec;
    PriorOptions ind_prior;
    ind_inst.attach(indep);
    ind_spec.attach(indep);
    ind_prior.attach(indep);
    double ind_eps_train = 0.02, ind_eps_gen = 0.2, ind_sigma_sq = 0.2;
    std::uint64_t ind_samples = 1000000;
    bool ind_oracle = false;
    indep->add_option("--eps-train", ind_eps_train, "Training loss threshold");
    indep->add_option("--eps-gen", ind_eps_gen, "Generalization loss threshold");
    indep->add_option("--samples", ind_samples, "Prior draws");
    indep->add_flag("--oracle-iid", ind_oracle,
                    "Replace the factorization by an i.i.d. Gaussian matrix");
    indep->add_option("--sigma-sq", ind_sigma_sq, "Entry variance in oracle mode");

    auto* spectrum = diag->add_subcommand("spectrum",
                                          "Lyapunov spectrum of random middle products");
    int spec_k = 5, spec_depth = 12, spec_trials = 100;
    bool spec_normalize = false;
    std::string spec_out = "-";
    spectrum->add_option("--k", spec_k, "Factor size");
    spectrum->add_option("--depth", spec_depth,
                         "Factorization depth (the product has depth-2 factors)");
    spectrum->add_option("--trials", spec_trials, "Independent products");
    spectrum->add_flag("--normalize", spec_normalize, "Normalize products to unit norm");
    spectrum->add_option("--out", spec_out, "CSV output (default stdout)");

    auto* rank = diag->add_subcommand("rank", "Rank-one structure of end-to-end draws");
    SpecOptions rank_spec;
    PriorOptions rank_prior;
    rank_spec.attach(rank);
    rank_prior.attach(rank);
    int rank_trials = 100, rank_m = 5, rank_mp = 5;
    std::string rank_out = "-";
    rank->add_option("--m", rank_m, "Output rows");
    rank->add_option("--m-prime", rank_mp, "Output columns");
    rank->add_option("--trials", rank_trials, "Independent draws");
    rank->add_option("--out", rank_out, "CSV output (default stdout)");

    // plot
    auto* plot = app.add_subcommand("plot", "Render a sweep CSV as an SVG");
    std::string plot_in, plot_out;
    plot->add_option("--in", plot_in, "Sweep CSV")->required();
    plot->add_option("--out", plot_out, "SVG output")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            write_text(gen_out, instance_to_json(gen_inst.resolve()) + "\n");
            return kExitOk;
        }

        if (gnc->parsed()) {
            const auto inst = gnc_inst.resolve();
            const auto spec = gnc_spec.resolve(inst);
            GncConfig cfg;
            cfg.eps_train = gnc_eps;
            cfg.num_samples = gnc_samples;
            cfg.batch_size = gnc_batch;
            cfg.prior = gnc_prior.resolve();
            cfg.precision = spec.precision;
            cfg.threads = threads;
            cfg.verbose = verbose;
            const auto rep = run_gnc(spec, inst, cfg, seed);
            write_text(gnc_out, rep.to_json() + "\n");
            return rep.has_mean ? kExitOk : kExitFlagged;
        }

        if (gd->parsed()) {
            const auto inst = gd_inst.resolve();
            const auto spec = gd_spec.resolve(inst);
            gd_cfg.adaptive = !gd_fixed_lr;
            const auto trace = run_gd(spec, inst, gd_cfg, seed);
            if (!gd_trace.empty()) {
                std::ofstream out(gd_trace);
                if (!out) throw std::runtime_error("cannot write: " + gd_trace);
                trace_to_csv(trace, out);
            }
            char line[256];
            std::snprintf(line, sizeof(line),
                          "{\"final_train_loss\": %.17g, \"final_gen_loss\": %.17g, "
                          "\"aborted\": %s, \"epochs\": %lld}\n",
                          trace.final_train_loss, trace.final_gen_loss,
                          trace.aborted ? "true" : "false",
                          static_cast<long long>(gd_cfg.epochs));
            std::cout << line;
            if (trace.aborted) {
                std::cerr << "gd aborted at epoch " << trace.abort_epoch << ": "
                          << trace.abort_reason << "\n";
                return kExitFlagged;
            }
            return kExitOk;
        }

        if (prior_cmd->parsed()) {
            const auto inst = prior_inst.resolve();
            const auto spec = prior_spec.resolve(inst);
            const auto losses =
                run_prior_baseline(spec, inst, prior_prior.resolve(), prior_trials, seed);
            std::ostringstream out;
            out << "trial,gen_loss\n";
            char line[64];
            for (std::size_t t = 0; t < losses.size(); ++t) {
                std::snprintf(line, sizeof(line), "%zu,%.17g\n", t, losses[t]);
                out << line;
            }
            write_text(prior_out, out.str());
            return kExitOk;
        }

        if (sweep->parsed()) {
            if (sweep_list) {
                for (const auto& name : preset_names()) std::cout << name << "\n";
                return kExitOk;
            }
            if (sweep_preset.empty())
                throw std::runtime_error("sweep needs --preset NAME (or --list)");
            SweepConfig cfg = load_preset(sweep_preset);
            if (sweep_desk) cfg = desk_scale(cfg);
            cfg.master_seed = seed;
            cfg.threads = threads;
            cfg.gnc.verbose = verbose;
            if (sweep_samples > 0) cfg.gnc.num_samples = sweep_samples;
            if (sweep_trials > 0) cfg.trials = sweep_trials;
            if (sweep_gd_cap >= 0) cfg.gd_axis_cap = sweep_gd_cap;

            const auto result = run_sweep(cfg);
            std::filesystem::create_directories(sweep_out_dir);
            const auto base = std::filesystem::path(sweep_out_dir);
            {
                std::ofstream csv(base / "sweep.csv");
                emit_csv(result, csv);
            }
            {
                std::ofstream svg(base / "sweep.svg");
                emit_plot(result, svg);
            }
            for (const auto& row : result.aggregates()) {
                char line[160];
                std::snprintf(line, sizeof(line),
                              "%s=%d %s: median=%.6g iqr=[%.6g, %.6g] n=%d\n",
                              to_string(cfg.axis).c_str(), row.axis_value,
                              to_string(row.optimizer).c_str(), row.median, row.q25, row.q75,
                              row.defined_cells);
                std::cout << line;
            }
            return result.any_flagged_failure() ? kExitFlagged : kExitOk;
        }

        if (indep->parsed()) {
            const auto inst = ind_inst.resolve();
            IndependenceProbe probe;
            if (ind_oracle) {
                probe = probe_independence_iid(inst, ind_sigma_sq, ind_eps_train, ind_eps_gen,
                                               ind_samples, seed, threads);
            } else {
                const auto spec = ind_spec.resolve(inst);
                probe = probe_independence(spec, inst, ind_prior.resolve(), ind_eps_train,
                                           ind_eps_gen, ind_samples, seed, threads);
            }
            std::cout << probe.to_json() << "\n";
            return probe.conditional_defined ? kExitOk : kExitFlagged;
        }

        if (spectrum->parsed()) {
            const auto probes =
                probe_spectrum(spec_k, spec_depth, spec_normalize, seed, spec_trials);
            std::ostringstream out;
            spectral_probes_to_csv(probes, out);
            write_text(spec_out, out.str());
            std::cerr << spectral_probes_summary_json(probes) << "\n";
            return kExitOk;
        }

        if (rank->parsed()) {
            ProblemInstance shape_only;  // only the dims feed the spec
            shape_only.meta.m = rank_m;
            shape_only.meta.m_prime = rank_mp;
            const auto spec = rank_spec.resolve(shape_only);
            const auto probes =
                probe_end_to_end_rank(spec, rank_prior.resolve(), seed, rank_trials);
            std::ostringstream out;
            spectral_probes_to_csv(probes, out);
            write_text(rank_out, out.str());
            std::cerr << spectral_probes_summary_json(probes) << "\n";
            return kExitOk;
        }

        if (plot->parsed()) {
            std::ofstream out(plot_out);
            if (!out) throw std::runtime_error("cannot write: " + plot_out);
            emit_plot_from_csv(read_text(plot_in), out);
            return kExitOk;
        }
    } catch (const std::exception& ex) {
        std::cerr << "error: " << ex.what() << "\n";
        return kExitFatal;
    }
    return kExitFatal;
}
