#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mflab/factorization.hpp"
#include "mflab/problem.hpp"

namespace mflab {

/// Full-batch gradient descent configuration. With adaptive == true the
/// base rate is divided by the square root of an exponential moving
/// average of squared gradient norms (one scalar across all layers unless
/// per_layer_ema): the EMA absorbs the current gradient first, then
/// eff_lr = base_lr / (sqrt(ema) + ema_softening). Only the step size is
/// affected, never the direction. With adaptive == false the update is
/// plain gradient descent with a fixed step.
struct GdConfig {
    double base_lr = 1e-4;
    std::int64_t epochs = 100000;
    double init_scale = 1e-3;
    double momentum = 0.0;   // in [0, 1); 0 = plain GD
    bool adaptive = true;
    double ema_alpha = 0.99;
    double ema_softening = 1e-6;
    bool per_layer_ema = false;  // sensitivity variant; default is a global scalar
    std::int64_t record_every = 1000;
};

struct GdTraceRow {
    std::int64_t epoch = 0;
    double train_loss = 0.0;
    double gen_loss = 0.0;
    double grad_norm = 0.0;
    double eff_lr = 0.0;
};

struct GdTrace {
    std::vector<GdTraceRow> rows;  // raw losses, no smoothing
    WeightSetting final_weights;
    double final_train_loss = 0.0;
    double final_gen_loss = 0.0;
    bool aborted = false;
    std::int64_t abort_epoch = -1;
    std::string abort_reason;
};

/// Near-zero initialization: entries uniform in +-1/sqrt(columns), then
/// multiplied by init_scale (> 0 required).
WeightSetting init_weights(const FactorizationSpec& spec, double init_scale,
                           std::uint64_t seed);

/// Runs `epochs` simultaneous-layer updates from init_weights(cfg.init_scale,
/// seed). Aborts (with the epoch in the trace) on non-finite losses/gradients
/// or when the training loss exceeds 1e6 times its initial value.
GdTrace run_gd(const FactorizationSpec& spec, const ProblemInstance& inst,
               const GdConfig& cfg, std::uint64_t seed);

/// Same, from an explicit initial weight setting.
GdTrace run_gd(const FactorizationSpec& spec, const ProblemInstance& inst,
               const GdConfig& cfg, WeightSetting initial);

/// CSV export: epoch, train_loss, gen_loss, grad_norm, eff_lr.
void trace_to_csv(const GdTrace& trace, std::ostream& out);

}  // namespace mflab
