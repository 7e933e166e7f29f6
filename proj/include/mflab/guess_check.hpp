#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mflab/factorization.hpp"
#include "mflab/problem.hpp"

namespace mflab {

struct GncConfig {
    double eps_train = 0.02;             // strict "<" acceptance threshold
    std::uint64_t num_samples = 1000000; // total draws, not accepted draws
    std::uint64_t batch_size = 8192;     // execution chunking; never affects results
    PriorSpec prior{};
    Precision precision = Precision::f64;
    int threads = 0;                     // <=0: hardware concurrency
    bool verbose = false;
    std::uint64_t keep_cap = 100000;     // accepted losses retained (lowest sample indices)
};

struct GncReport {
    std::uint64_t total_drawn = 0;
    std::uint64_t accepted_count = 0;  // f64-verified acceptances
    bool has_mean = false;             // false iff accepted_count == 0
    double mean_gen_loss = std::numeric_limits<double>::quiet_NaN();
    double mean_train_loss = std::numeric_limits<double>::quiet_NaN();
    double acceptance_rate = 0.0;

    // Accepted-sample distribution, in sample-index order, capped at
    // keep_cap. Sample `accepted_indices[i]` can be replayed with
    // `gnc_sample(spec, prior, seed, index)`.
    std::vector<double> accepted_gen_losses;
    std::vector<std::uint64_t> accepted_indices;

    // f32 fast path bookkeeping: candidates passing the f32 screen and
    // those among them that failed f64 re-verification.
    std::uint64_t f32_screen_accepted = 0;
    std::uint64_t f32_discrepancies = 0;

    std::string to_json() const;
};

/// Stream key of G&C sample `index` under master seed `seed`.
std::uint64_t gnc_sample_key(std::uint64_t seed, std::uint64_t index);

/// Stream key of prior-baseline draw `index` under master seed `seed`.
std::uint64_t prior_sample_key(std::uint64_t seed, std::uint64_t index);

/// Replays one sampler draw exactly.
WeightSetting gnc_sample(const FactorizationSpec& spec, const PriorSpec& prior,
                         std::uint64_t seed, std::uint64_t index);

/// Draws cfg.num_samples weight settings from the prior, accepting those
/// with training loss strictly below eps_train, and aggregates the
/// generalization losses of the accepted ones. Sample i's randomness is a
/// pure function of (seed, i): the report is independent of batch size
/// and worker count. Zero acceptances yield has_mean == false, never an
/// error.
GncReport run_gnc(const FactorizationSpec& spec, const ProblemInstance& inst,
                  const GncConfig& cfg, std::uint64_t seed);

/// Generalization losses of `trials` independent prior draws that ignore
/// the training data (the "chance" baseline).
std::vector<double> run_prior_baseline(const FactorizationSpec& spec,
                                       const ProblemInstance& inst, const PriorSpec& prior,
                                       int trials, std::uint64_t seed);

}  // namespace mflab
