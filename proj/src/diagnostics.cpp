#include "mflab/diagnostics.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <utility>

#include "mflab/parallel.hpp"
#include "mflab/rng.hpp"

namespace mflab {

namespace {

constexpr std::uint64_t kProbeTag = 0x70726f6265ull;  // "probe"
constexpr std::uint64_t kSpecTag = 0x73706563ull;     // "spec"

struct EventCounts {
    std::uint64_t joint = 0, train_only = 0, gen_only = 0, neither = 0;
};

IndependenceProbe finalize(EventCounts c, double eps_train, double eps_gen,
                           std::uint64_t total) {
    IndependenceProbe p;
    p.eps_train = eps_train;
    p.eps_gen = eps_gen;
    p.joint = c.joint;
    p.train_only = c.train_only;
    p.gen_only = c.gen_only;
    p.neither = c.neither;
    p.total = total;
    const std::uint64_t train_acc = c.joint + c.train_only;
    const std::uint64_t gen_acc = c.joint + c.gen_only;
    p.p_gen = static_cast<double>(gen_acc) / static_cast<double>(total);
    p.low_acceptance_warning = train_acc < 30;
    if (train_acc > 0) {
        p.conditional_defined = true;
        p.p_gen_given_train = static_cast<double>(c.joint) / static_cast<double>(train_acc);
        p.gap = p.p_gen_given_train - p.p_gen;
        // Score-test standard error: both binomial variances evaluated at
        // the null proportion p_gen (the hypothesis the gap is tested
        // against). The Wald form p_hat(1-p_hat) collapses to zero when a
        // handful of acceptances all land on the same side of eps_gen.
        const double null_var = p.p_gen * (1.0 - p.p_gen);
        p.standard_error =
            std::sqrt(null_var / static_cast<double>(train_acc) +
                      null_var / static_cast<double>(total));
    }
    return p;
}

template <typename DrawFn>
IndependenceProbe probe_events(double eps_train, double eps_gen, std::uint64_t num_samples,
                               int threads, DrawFn&& make_worker) {
    auto chunks = parallel_chunks<EventCounts>(
        num_samples, 8192, threads,
        [&](std::uint64_t lo, std::uint64_t hi, std::uint64_t) {
            auto eval_one = make_worker();
            EventCounts c;
            for (std::uint64_t i = lo; i < hi; ++i) {
                const auto [tl, gl] = eval_one(i);
                const bool t_ok = tl < eps_train;
                const bool g_ok = gl < eps_gen;
                if (t_ok && g_ok)
                    ++c.joint;
                else if (t_ok)
                    ++c.train_only;
                else if (g_ok)
                    ++c.gen_only;
                else
                    ++c.neither;
            }
            return c;
        });
    EventCounts total;
    for (const auto& c : chunks) {
        total.joint += c.joint;
        total.train_only += c.train_only;
        total.gen_only += c.gen_only;
        total.neither += c.neither;
    }
    return finalize(total, eps_train, eps_gen, num_samples);
}

}  // namespace

std::string IndependenceProbe::to_json() const {
    nlohmann::json j;
    j["eps_train"] = eps_train;
    j["eps_gen"] = eps_gen;
    j["p_gen_given_train"] = conditional_defined ? nlohmann::json(p_gen_given_train)
                                                 : nlohmann::json(nullptr);
    j["p_gen"] = p_gen;
    j["gap"] = conditional_defined ? nlohmann::json(gap) : nlohmann::json(nullptr);
    j["standard_error"] = standard_error;
    j["counts"] = {{"joint", joint},
                   {"train_only", train_only},
                   {"gen_only", gen_only},
                   {"neither", neither},
                   {"total", total}};
    j["conditional_defined"] = conditional_defined;
    j["low_acceptance_warning"] = low_acceptance_warning;
    return j.dump(2);
}

IndependenceProbe probe_independence(const FactorizationSpec& spec,
                                     const ProblemInstance& inst, const PriorSpec& prior,
                                     double eps_train, double eps_gen,
                                     std::uint64_t num_samples, std::uint64_t seed,
                                     int threads) {
    spec.validate();
    if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
    const LossEvaluator eval(inst);
    return probe_events(eps_train, eps_gen, num_samples, threads, [&] {
        struct Worker {
            const FactorizationSpec& spec;
            const PriorSpec& prior;
            const LossEvaluator& eval;
            std::uint64_t seed;
            std::vector<Matrix> layers;
            Matrix buf_a, buf_b, prod, out;

            std::pair<double, double> operator()(std::uint64_t i) {
                rng::Stream stream(rng::derive(seed, kProbeTag, i));
                draw_prior_into(spec, prior, stream, layers, buf_a, buf_b, prod);
                forward_into(spec, layers, buf_a, buf_b, out);
                return {eval.train(out), eval.gen(out)};
            }
        };
        Worker w{spec, prior, eval, seed, {}, {}, {}, {}, {}};
        w.layers.resize(spec.depth);
        for (int j = 0; j < spec.depth; ++j)
            w.layers[j].resize(spec.layer_rows(j), spec.layer_cols(j));
        return w;
    });
}

IndependenceProbe probe_independence_iid(const ProblemInstance& inst, double sigma_sq,
                                         double eps_train, double eps_gen,
                                         std::uint64_t num_samples, std::uint64_t seed,
                                         int threads) {
    if (!(sigma_sq > 0.0)) throw std::invalid_argument("sigma_sq must be positive");
    if (num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
    const LossEvaluator eval(inst);
    const int m = inst.meta.m;
    const int mp = inst.meta.m_prime;
    const double sd = std::sqrt(sigma_sq);
    return probe_events(eps_train, eps_gen, num_samples, threads, [&] {
        struct Worker {
            const LossEvaluator& eval;
            std::uint64_t seed;
            double sd;
            Matrix w;

            std::pair<double, double> operator()(std::uint64_t i) {
                rng::Stream stream(rng::derive(seed, kProbeTag, i));
                for (int c = 0; c < w.cols(); ++c)
                    for (int r = 0; r < w.rows(); ++r) w(r, c) = sd * stream.normal();
                return {eval.train(w), eval.gen(w)};
            }
        };
        Worker w{eval, seed, sd, Matrix(m, mp)};
        return w;
    });
}

SpectralProbe spectral_probe_of(const Matrix& w, int lyapunov_factors) {
    if (lyapunov_factors < 1) throw std::invalid_argument("lyapunov_factors must be >= 1");
    SpectralProbe p;
    Eigen::JacobiSVD<Matrix> svd(w);
    p.singular_values = svd.singularValues();
    const int n = static_cast<int>(p.singular_values.size());
    p.lyapunov.resize(n);
    for (int i = 0; i < n; ++i)
        p.lyapunov(i) = std::log(p.singular_values(i)) / static_cast<double>(lyapunov_factors);
    p.gap = n >= 2 ? p.lyapunov(0) - p.lyapunov(1) : 0.0;
    const double total_sq = p.singular_values.squaredNorm();
    const double tail_sq = total_sq - p.singular_values(0) * p.singular_values(0);
    p.rank_one_residual = total_sq > 0.0 ? std::sqrt(std::max(0.0, tail_sq) / total_sq) : 0.0;
    p.effective_rank = effective_rank(w);
    return p;
}

std::vector<SpectralProbe> probe_spectrum(int k, int depth, bool normalize,
                                          std::uint64_t seed, int trials) {
    if (depth < 3) throw std::invalid_argument("spectrum probe needs depth >= 3");
    if (k < 2) throw std::invalid_argument("spectrum probe needs k >= 2");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    const int factors = depth - 2;
    const double sd = 1.0 / std::sqrt(static_cast<double>(k));
    std::vector<SpectralProbe> out;
    out.reserve(trials);
    Matrix cur(k, k), factor(k, k), next(k, k);
    for (int t = 0; t < trials; ++t) {
        rng::Stream stream(rng::derive(seed, kSpecTag, static_cast<std::uint64_t>(t)));
        cur.setIdentity();
        for (int f = 0; f < factors; ++f) {
            for (int c = 0; c < k; ++c)
                for (int r = 0; r < k; ++r) factor(r, c) = sd * stream.normal();
            next.noalias() = factor * cur;
            std::swap(cur, next);
        }
        Matrix w = cur;
        if (normalize) {
            const double norm = w.norm();
            if (norm > 0.0) w /= norm;
        }
        SpectralProbe p = spectral_probe_of(w, factors);
        if (!p.singular_values.allFinite()) p.ok = false;
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<SpectralProbe> probe_end_to_end_rank(const FactorizationSpec& spec,
                                                 const PriorSpec& prior, std::uint64_t seed,
                                                 int trials) {
    spec.validate();
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    const int factors = std::max(1, spec.depth - 2);
    std::vector<SpectralProbe> out;
    out.reserve(trials);
    for (int t = 0; t < trials; ++t) {
        const WeightSetting ws =
            sample_prior(spec, prior, rng::derive(seed, kSpecTag, static_cast<std::uint64_t>(t)));
        SpectralProbe p = spectral_probe_of(forward(spec, ws), factors);
        if (!p.singular_values.allFinite()) p.ok = false;
        out.push_back(std::move(p));
    }
    return out;
}

double effective_rank(const Matrix& w) {
    Eigen::JacobiSVD<Matrix> svd(w);
    const Eigen::VectorXd& sv = svd.singularValues();
    const double total = sv.sum();
    if (total <= 0.0) return 0.0;
    double entropy = 0.0;
    for (int i = 0; i < sv.size(); ++i) {
        const double p = sv(i) / total;
        if (p > 0.0) entropy -= p * std::log(p);
    }
    return std::exp(entropy);
}

void spectral_probes_to_csv(const std::vector<SpectralProbe>& probes, std::ostream& out) {
    out << "trial,ok,sigma_1,sigma_2,lyapunov_1,lyapunov_2,gap,rank_one_residual,"
           "effective_rank\n";
    char line[320];
    for (std::size_t t = 0; t < probes.size(); ++t) {
        const auto& p = probes[t];
        const int n = static_cast<int>(p.singular_values.size());
        std::snprintf(line, sizeof(line),
                      "%zu,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", t, p.ok ? 1 : 0,
                      n > 0 ? p.singular_values(0) : 0.0, n > 1 ? p.singular_values(1) : 0.0,
                      n > 0 ? p.lyapunov(0) : 0.0, n > 1 ? p.lyapunov(1) : 0.0, p.gap,
                      p.rank_one_residual, p.effective_rank);
        out << line;
    }
}

std::string spectral_probes_summary_json(const std::vector<SpectralProbe>& probes) {
    std::vector<double> gaps, residuals, eranks;
    int failed = 0;
    for (const auto& p : probes) {
        if (!p.ok) {
            ++failed;
            continue;
        }
        gaps.push_back(p.gap);
        residuals.push_back(p.rank_one_residual);
        eranks.push_back(p.effective_rank);
    }
    auto median = [](std::vector<double> v) {
        if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
        std::sort(v.begin(), v.end());
        const std::size_t n = v.size();
        return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
    };
    nlohmann::json j;
    j["trials"] = probes.size();
    j["failed"] = failed;
    j["median_gap"] = median(gaps);
    j["median_rank_one_residual"] = median(residuals);
    j["median_effective_rank"] = median(eranks);
    return j.dump(2);
}

}  // namespace mflab
