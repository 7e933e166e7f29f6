#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "mflab/factorization.hpp"
#include "mflab/problem.hpp"

namespace mflab {

/// Joint statistics of the events {train loss < eps_train} and
/// {gen loss < eps_gen} over prior draws. gap = p_gen_given_train - p_gen:
/// positive when conditioning on fitting the data makes low generalization
/// loss more likely, zero when the events are independent.
struct IndependenceProbe {
    double eps_train = 0.0;
    double eps_gen = 0.0;
    double p_gen_given_train = 0.0;
    double p_gen = 0.0;
    double gap = 0.0;
    double standard_error = 0.0;  // binomial score SE of the gap under gap = 0
    std::uint64_t joint = 0;
    std::uint64_t train_only = 0;
    std::uint64_t gen_only = 0;
    std::uint64_t neither = 0;
    std::uint64_t total = 0;
    bool conditional_defined = false;  // false iff zero train-acceptances
    bool low_acceptance_warning = false;  // fewer than 30 train-acceptances

    std::string to_json() const;
};

/// Single pass over `num_samples` factorized prior draws counting the four
/// event combinations.
IndependenceProbe probe_independence(const FactorizationSpec& spec,
                                     const ProblemInstance& inst, const PriorSpec& prior,
                                     double eps_train, double eps_gen,
                                     std::uint64_t num_samples, std::uint64_t seed,
                                     int threads = 0);

/// Oracle mode: W is a true i.i.d. Gaussian matrix with per-entry variance
/// sigma_sq (no factorization), for which the two events are exactly
/// independent.
IndependenceProbe probe_independence_iid(const ProblemInstance& inst, double sigma_sq,
                                         double eps_train, double eps_gen,
                                         std::uint64_t num_samples, std::uint64_t seed,
                                         int threads = 0);

/// Spectrum summary of one matrix draw: singular values, Lyapunov
/// exponents log(sigma_i)/(d-2), the top-two Lyapunov gap, the relative
/// distance to the best rank-one approximation, and the entropy effective
/// rank.
struct SpectralProbe {
    Eigen::VectorXd singular_values;  // descending
    Eigen::VectorXd lyapunov;
    double gap = 0.0;
    double rank_one_residual = 0.0;  // in [0, 1]
    double effective_rank = 0.0;
    bool ok = true;
};

/// Probe of one matrix; lyapunov_factors is the product length the
/// exponents are scaled by (>= 1).
SpectralProbe spectral_probe_of(const Matrix& w, int lyapunov_factors);

/// Per trial, multiplies depth-2 i.i.d. Gaussian k x k factors (entry
/// variance 1/k) and probes the product. Requires depth >= 3 and k >= 2.
/// The normalize flag rescales the product to unit Frobenius norm first
/// (the residual is scale-invariant either way).
std::vector<SpectralProbe> probe_spectrum(int k, int depth, bool normalize,
                                          std::uint64_t seed, int trials);

/// The same probe applied to full factorized draws from the prior.
std::vector<SpectralProbe> probe_end_to_end_rank(const FactorizationSpec& spec,
                                                 const PriorSpec& prior, std::uint64_t seed,
                                                 int trials);

/// exp(entropy of the normalized singular value distribution).
double effective_rank(const Matrix& w);

/// CSV rows (one per trial) for spectral probes.
void spectral_probes_to_csv(const std::vector<SpectralProbe>& probes, std::ostream& out);
std::string spectral_probes_summary_json(const std::vector<SpectralProbe>& probes);

}  // namespace mflab
