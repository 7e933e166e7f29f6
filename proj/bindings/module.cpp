#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mflab/descent.hpp"
#include "mflab/diagnostics.hpp"
#include "mflab/factorization.hpp"
#include "mflab/guess_check.hpp"
#include "mflab/harness.hpp"
#include "mflab/problem.hpp"

namespace py = pybind11;
using namespace mflab;

namespace {

FactorizationSpec make_spec(int depth, int width, int m, int m_prime,
                            const std::string& activation, double slope) {
    FactorizationSpec spec;
    spec.depth = depth;
    spec.width = width;
    spec.out_dim = m;
    spec.in_dim = m_prime;
    spec.activation.kind = activation_kind_from_string(activation);
    spec.activation.slope = slope;
    spec.validate();
    return spec;
}

PriorSpec make_prior(const std::string& base, double param, bool normalize, double eps_norm) {
    PriorSpec prior;
    if (base == "gaussian")
        prior.base = BaseKind::gaussian;
    else if (base == "uniform")
        prior.base = BaseKind::uniform;
    else
        throw std::invalid_argument("unknown prior base: " + base);
    prior.param = param;
    prior.normalize = normalize;
    prior.eps_norm = eps_norm;
    return prior;
}

WeightSetting to_weights(const std::vector<Matrix>& layers) {
    WeightSetting ws;
    ws.layers = layers;
    return ws;
}

}  // namespace

PYBIND11_MODULE(_mflab, m) {
    m.doc() = "Low-rank matrix sensing via deep factorization: Guess & Check vs "
              "gradient descent";

    py::class_<InstanceMeta>(m, "InstanceMeta")
        .def_readonly("m", &InstanceMeta::m)
        .def_readonly("m_prime", &InstanceMeta::m_prime)
        .def_readonly("r", &InstanceMeta::r)
        .def_readonly("b", &InstanceMeta::b)
        .def_readonly("n", &InstanceMeta::n)
        .def_readonly("seed", &InstanceMeta::seed)
        .def_property_readonly("kind",
                               [](const InstanceMeta& meta) { return to_string(meta.kind); });

    py::class_<ProblemInstance>(m, "ProblemInstance")
        .def_readonly("ground_truth", &ProblemInstance::ground_truth)
        .def_readonly("measurements", &ProblemInstance::measurements)
        .def_readonly("labels", &ProblemInstance::labels)
        .def_readonly("complement_basis", &ProblemInstance::complement_basis)
        .def_readonly("meta", &ProblemInstance::meta)
        .def("to_json", &instance_to_json)
        .def_static("from_json", &instance_from_json, py::arg("text"));

    m.def("make_instance",
          [](int m_, int m_prime, int r, double b, int n, const std::string& kind,
             std::uint64_t seed) {
              return make_instance(m_, m_prime, r, b, n, measurement_kind_from_string(kind),
                                   seed);
          },
          py::arg("m") = 5, py::arg("m_prime") = 5, py::arg("r") = 1, py::arg("b") = 1.0,
          py::arg("n") = 15, py::arg("kind") = "gaussian", py::arg("seed") = 0);
    m.def("make_ground_truth", &make_ground_truth, py::arg("m"), py::arg("m_prime"),
          py::arg("r"), py::arg("b"), py::arg("seed"));
    m.def("make_measurements",
          [](int m_, int m_prime, int n, const std::string& kind, std::uint64_t seed) {
              return make_measurements(m_, m_prime, n, measurement_kind_from_string(kind),
                                       seed);
          },
          py::arg("m"), py::arg("m_prime"), py::arg("n"), py::arg("kind") = "gaussian",
          py::arg("seed") = 0);
    m.def("make_complement_basis", &make_complement_basis, py::arg("measurements"));
    m.def("train_loss", &train_loss, py::arg("w"), py::arg("instance"));
    m.def("gen_loss", &gen_loss, py::arg("w"), py::arg("instance"));

    py::class_<RipEstimate>(m, "RipEstimate")
        .def_readonly("order", &RipEstimate::order)
        .def_readonly("delta_hat", &RipEstimate::delta_hat)
        .def_readonly("samples_used", &RipEstimate::samples_used);
    m.def("estimate_rip", &estimate_rip, py::arg("measurements"), py::arg("order"),
          py::arg("samples"), py::arg("seed") = 0);

    py::class_<FactorizationSpec>(m, "FactorizationSpec")
        .def(py::init(&make_spec), py::arg("depth") = 2, py::arg("width") = 5,
             py::arg("m") = 5, py::arg("m_prime") = 5, py::arg("activation") = "linear",
             py::arg("slope") = 0.2)
        .def_readonly("depth", &FactorizationSpec::depth)
        .def_readonly("width", &FactorizationSpec::width)
        .def_readonly("m", &FactorizationSpec::out_dim)
        .def_readonly("m_prime", &FactorizationSpec::in_dim)
        .def_property_readonly("activation", [](const FactorizationSpec& spec) {
            return to_string(spec.activation.kind);
        });

    py::class_<PriorSpec>(m, "PriorSpec")
        .def(py::init(&make_prior), py::arg("base") = "gaussian", py::arg("param") = 1.0,
             py::arg("normalize") = false, py::arg("eps_norm") = 1e-6)
        .def_readonly("param", &PriorSpec::param)
        .def_readonly("normalize", &PriorSpec::normalize);

    m.def("forward",
          [](const FactorizationSpec& spec, const std::vector<Matrix>& layers) {
              return forward(spec, to_weights(layers));
          },
          py::arg("spec"), py::arg("layers"));
    m.def("sample_prior",
          [](const FactorizationSpec& spec, const PriorSpec& prior, std::uint64_t seed) {
              return sample_prior(spec, prior, seed).layers;
          },
          py::arg("spec"), py::arg("prior"), py::arg("seed"));
    m.def("fact_train_loss",
          [](const FactorizationSpec& spec, const std::vector<Matrix>& layers,
             const ProblemInstance& inst) {
              return fact_train_loss(spec, to_weights(layers), inst);
          },
          py::arg("spec"), py::arg("layers"), py::arg("instance"));
    m.def("fact_gen_loss",
          [](const FactorizationSpec& spec, const std::vector<Matrix>& layers,
             const ProblemInstance& inst) {
              return fact_gen_loss(spec, to_weights(layers), inst);
          },
          py::arg("spec"), py::arg("layers"), py::arg("instance"));
    m.def("loss_gradient",
          [](const FactorizationSpec& spec, const std::vector<Matrix>& layers,
             const ProblemInstance& inst) {
              return loss_gradient(spec, to_weights(layers), inst).layers;
          },
          py::arg("spec"), py::arg("layers"), py::arg("instance"));

    py::class_<GncReport>(m, "GncReport")
        .def_readonly("total_drawn", &GncReport::total_drawn)
        .def_readonly("accepted_count", &GncReport::accepted_count)
        .def_readonly("has_mean", &GncReport::has_mean)
        .def_readonly("mean_gen_loss", &GncReport::mean_gen_loss)
        .def_readonly("mean_train_loss", &GncReport::mean_train_loss)
        .def_readonly("acceptance_rate", &GncReport::acceptance_rate)
        .def_readonly("accepted_gen_losses", &GncReport::accepted_gen_losses)
        .def_readonly("accepted_indices", &GncReport::accepted_indices)
        .def_readonly("f32_screen_accepted", &GncReport::f32_screen_accepted)
        .def_readonly("f32_discrepancies", &GncReport::f32_discrepancies)
        .def("to_json", &GncReport::to_json);

    m.def("run_gnc",
          [](const FactorizationSpec& spec, const ProblemInstance& inst, double eps_train,
             std::uint64_t num_samples, const PriorSpec& prior, std::uint64_t seed,
             bool f32, int threads, std::uint64_t batch_size) {
              GncConfig cfg;
              cfg.eps_train = eps_train;
              cfg.num_samples = num_samples;
              cfg.prior = prior;
              cfg.precision = f32 ? Precision::f32 : Precision::f64;
              cfg.threads = threads;
              cfg.batch_size = batch_size;
              py::gil_scoped_release release;
              return run_gnc(spec, inst, cfg, seed);
          },
          py::arg("spec"), py::arg("instance"), py::arg("eps_train"),
          py::arg("num_samples"), py::arg("prior") = PriorSpec{}, py::arg("seed") = 0,
          py::arg("f32") = false, py::arg("threads") = 0, py::arg("batch_size") = 8192);
    m.def("gnc_sample",
          [](const FactorizationSpec& spec, const PriorSpec& prior, std::uint64_t seed,
             std::uint64_t index) { return gnc_sample(spec, prior, seed, index).layers; },
          py::arg("spec"), py::arg("prior"), py::arg("seed"), py::arg("index"));
    m.def("run_prior_baseline",
          [](const FactorizationSpec& spec, const ProblemInstance& inst,
             const PriorSpec& prior, int trials, std::uint64_t seed) {
              py::gil_scoped_release release;
              return run_prior_baseline(spec, inst, prior, trials, seed);
          },
          py::arg("spec"), py::arg("instance"), py::arg("prior") = PriorSpec{},
          py::arg("trials") = 8, py::arg("seed") = 0);

    py::class_<GdTraceRow>(m, "GdTraceRow")
        .def_readonly("epoch", &GdTraceRow::epoch)
        .def_readonly("train_loss", &GdTraceRow::train_loss)
        .def_readonly("gen_loss", &GdTraceRow::gen_loss)
        .def_readonly("grad_norm", &GdTraceRow::grad_norm)
        .def_readonly("eff_lr", &GdTraceRow::eff_lr);
    py::class_<GdTrace>(m, "GdTrace")
        .def_readonly("rows", &GdTrace::rows)
        .def_readonly("final_train_loss", &GdTrace::final_train_loss)
        .def_readonly("final_gen_loss", &GdTrace::final_gen_loss)
        .def_readonly("aborted", &GdTrace::aborted)
        .def_readonly("abort_epoch", &GdTrace::abort_epoch)
        .def_readonly("abort_reason", &GdTrace::abort_reason)
        .def_property_readonly("final_weights",
                               [](const GdTrace& t) { return t.final_weights.layers; });

    m.def("init_weights",
          [](const FactorizationSpec& spec, double init_scale, std::uint64_t seed) {
              return init_weights(spec, init_scale, seed).layers;
          },
          py::arg("spec"), py::arg("init_scale"), py::arg("seed"));
    m.def("run_gd",
          [](const FactorizationSpec& spec, const ProblemInstance& inst, double base_lr,
             std::int64_t epochs, double init_scale, double momentum, bool adaptive,
             std::int64_t record_every, std::uint64_t seed) {
              GdConfig cfg;
              cfg.base_lr = base_lr;
              cfg.epochs = epochs;
              cfg.init_scale = init_scale;
              cfg.momentum = momentum;
              cfg.adaptive = adaptive;
              cfg.record_every = record_every;
              py::gil_scoped_release release;
              return run_gd(spec, inst, cfg, seed);
          },
          py::arg("spec"), py::arg("instance"), py::arg("base_lr") = 1e-4,
          py::arg("epochs") = 100000, py::arg("init_scale") = 1e-3,
          py::arg("momentum") = 0.0, py::arg("adaptive") = true,
          py::arg("record_every") = 1000, py::arg("seed") = 0);

    py::class_<IndependenceProbe>(m, "IndependenceProbe")
        .def_readonly("eps_train", &IndependenceProbe::eps_train)
        .def_readonly("eps_gen", &IndependenceProbe::eps_gen)
        .def_readonly("p_gen_given_train", &IndependenceProbe::p_gen_given_train)
        .def_readonly("p_gen", &IndependenceProbe::p_gen)
        .def_readonly("gap", &IndependenceProbe::gap)
        .def_readonly("standard_error", &IndependenceProbe::standard_error)
        .def_readonly("joint", &IndependenceProbe::joint)
        .def_readonly("train_only", &IndependenceProbe::train_only)
        .def_readonly("gen_only", &IndependenceProbe::gen_only)
        .def_readonly("neither", &IndependenceProbe::neither)
        .def_readonly("total", &IndependenceProbe::total)
        .def_readonly("conditional_defined", &IndependenceProbe::conditional_defined)
        .def_readonly("low_acceptance_warning", &IndependenceProbe::low_acceptance_warning)
        .def("to_json", &IndependenceProbe::to_json);
    m.def("probe_independence",
          [](const FactorizationSpec& spec, const ProblemInstance& inst,
             const PriorSpec& prior, double eps_train, double eps_gen,
             std::uint64_t num_samples, std::uint64_t seed, int threads) {
              py::gil_scoped_release release;
              return probe_independence(spec, inst, prior, eps_train, eps_gen, num_samples,
                                        seed, threads);
          },
          py::arg("spec"), py::arg("instance"), py::arg("prior"), py::arg("eps_train"),
          py::arg("eps_gen"), py::arg("num_samples"), py::arg("seed") = 0,
          py::arg("threads") = 0);
    m.def("probe_independence_iid",
          [](const ProblemInstance& inst, double sigma_sq, double eps_train, double eps_gen,
             std::uint64_t num_samples, std::uint64_t seed, int threads) {
              py::gil_scoped_release release;
              return probe_independence_iid(inst, sigma_sq, eps_train, eps_gen, num_samples,
                                            seed, threads);
          },
          py::arg("instance"), py::arg("sigma_sq"), py::arg("eps_train"), py::arg("eps_gen"),
          py::arg("num_samples"), py::arg("seed") = 0, py::arg("threads") = 0);

    py::class_<SpectralProbe>(m, "SpectralProbe")
        .def_readonly("singular_values", &SpectralProbe::singular_values)
        .def_readonly("lyapunov", &SpectralProbe::lyapunov)
        .def_readonly("gap", &SpectralProbe::gap)
        .def_readonly("rank_one_residual", &SpectralProbe::rank_one_residual)
        .def_readonly("effective_rank", &SpectralProbe::effective_rank)
        .def_readonly("ok", &SpectralProbe::ok);
    m.def("probe_spectrum", &probe_spectrum, py::arg("k"), py::arg("depth"),
          py::arg("normalize") = false, py::arg("seed") = 0, py::arg("trials") = 100);
    m.def("probe_end_to_end_rank", &probe_end_to_end_rank, py::arg("spec"), py::arg("prior"),
          py::arg("seed") = 0, py::arg("trials") = 100);
    m.def("effective_rank", &effective_rank, py::arg("w"));
    m.def("spectral_probe_of", &spectral_probe_of, py::arg("w"),
          py::arg("lyapunov_factors") = 1);

    py::class_<AggregateRow>(m, "AggregateRow")
        .def_readonly("axis_value", &AggregateRow::axis_value)
        .def_property_readonly("optimizer",
                               [](const AggregateRow& r) { return to_string(r.optimizer); })
        .def_readonly("median", &AggregateRow::median)
        .def_readonly("q25", &AggregateRow::q25)
        .def_readonly("q75", &AggregateRow::q75)
        .def_readonly("defined_cells", &AggregateRow::defined_cells)
        .def_readonly("undefined_cells", &AggregateRow::undefined_cells);

    py::class_<SweepConfig>(m, "SweepConfig")
        .def_readonly("name", &SweepConfig::name)
        .def_readonly("axis_values", &SweepConfig::axis_values)
        .def_readonly("trials", &SweepConfig::trials)
        .def_property_readonly("axis",
                               [](const SweepConfig& cfg) { return to_string(cfg.axis); })
        .def_property_readonly("eps_train",
                               [](const SweepConfig& cfg) { return cfg.gnc.eps_train; })
        .def_property_readonly("num_samples",
                               [](const SweepConfig& cfg) { return cfg.gnc.num_samples; })
        .def_property("master_seed",
                      [](const SweepConfig& cfg) { return cfg.master_seed; },
                      [](SweepConfig& cfg, std::uint64_t seed) { cfg.master_seed = seed; })
        .def_property("samples_override",
                      [](const SweepConfig& cfg) { return cfg.gnc.num_samples; },
                      [](SweepConfig& cfg, std::uint64_t n) { cfg.gnc.num_samples = n; })
        .def_property("trials_override",
                      [](const SweepConfig& cfg) { return cfg.trials; },
                      [](SweepConfig& cfg, int t) { cfg.trials = t; });

    py::class_<SweepResult>(m, "SweepResult")
        .def("aggregates", &SweepResult::aggregates)
        .def("to_csv", &sweep_to_csv)
        .def("any_flagged_failure", &SweepResult::any_flagged_failure);

    m.def("preset_names", &preset_names);
    m.def("load_preset", &load_preset, py::arg("name"));
    m.def("desk_scale", &desk_scale, py::arg("config"));
    m.def("run_sweep",
          [](const SweepConfig& cfg) {
              py::gil_scoped_release release;
              return run_sweep(cfg);
          },
          py::arg("config"));

    m.attr("__version__") = "1.0.0";
}
