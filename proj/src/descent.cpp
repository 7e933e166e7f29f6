#include "mflab/descent.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>

#include "mflab/rng.hpp"

namespace mflab {

WeightSetting init_weights(const FactorizationSpec& spec, double init_scale,
                           std::uint64_t seed) {
    spec.validate();
    if (!(init_scale > 0.0)) throw std::invalid_argument("init_scale must be positive");
    rng::Stream stream(rng::derive(seed, 0x696e6974ull));  // "init"
    WeightSetting ws;
    ws.layers.resize(spec.depth);
    for (int j = 0; j < spec.depth; ++j) {
        const int rows = spec.layer_rows(j);
        const int cols = spec.layer_cols(j);
        const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
        Matrix& w = ws.layers[j];
        w.resize(rows, cols);
        for (int c = 0; c < cols; ++c)
            for (int r = 0; r < rows; ++r)
                w(r, c) = init_scale * stream.uniform(-bound, bound);
    }
    return ws;
}

GdTrace run_gd(const FactorizationSpec& spec, const ProblemInstance& inst,
               const GdConfig& cfg, std::uint64_t seed) {
    return run_gd(spec, inst, cfg, init_weights(spec, cfg.init_scale, seed));
}

GdTrace run_gd(const FactorizationSpec& spec, const ProblemInstance& inst,
               const GdConfig& cfg, WeightSetting initial) {
    spec.validate();
    check_shapes(spec, initial);
    if (!(cfg.base_lr > 0.0)) throw std::invalid_argument("base_lr must be positive");
    if (cfg.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
        throw std::invalid_argument("momentum must lie in [0, 1)");

    const LossEvaluator eval(inst);
    GdTrace trace;
    WeightSetting ws = std::move(initial);

    const int d = spec.depth;
    std::vector<Matrix> velocity;
    if (cfg.momentum > 0.0) {
        velocity.resize(d);
        for (int j = 0; j < d; ++j)
            velocity[j] = Matrix::Zero(spec.layer_rows(j), spec.layer_cols(j));
    }
    double ema = 0.0;
    std::vector<double> ema_layers(cfg.per_layer_ema ? d : 0, 0.0);

    Matrix buf_a, buf_b, w_out;
    double initial_train = -1.0;
    double last_eff = 0.0;

    auto losses_of_current = [&](double& train, double& gen) {
        forward_into(spec, ws.layers, buf_a, buf_b, w_out);
        train = eval.train(w_out);
        gen = eval.gen(w_out);
    };

    for (std::int64_t t = 0; t < cfg.epochs; ++t) {
        const WeightSetting grad = loss_gradient(spec, ws, eval);
        double train, gen;
        losses_of_current(train, gen);
        if (t == 0) initial_train = train;

        double grad_sq = 0.0;
        for (const auto& g : grad.layers) grad_sq += g.squaredNorm();
        const double grad_norm = std::sqrt(grad_sq);

        if (!std::isfinite(train) || !std::isfinite(grad_sq)) {
            trace.aborted = true;
            trace.abort_epoch = t;
            trace.abort_reason = "non-finite loss or gradient";
            break;
        }
        if (initial_train > 0.0 && train > 1e6 * initial_train) {
            trace.aborted = true;
            trace.abort_epoch = t;
            trace.abort_reason = "divergence guard: train loss exceeded 1e6 x initial";
            break;
        }

        double eff = cfg.base_lr;
        if (cfg.adaptive && !cfg.per_layer_ema) {
            ema = cfg.ema_alpha * ema + (1.0 - cfg.ema_alpha) * grad_sq;
            eff = cfg.base_lr / (std::sqrt(ema) + cfg.ema_softening);
        }
        last_eff = eff;

        if (cfg.record_every > 0 && t % cfg.record_every == 0)
            trace.rows.push_back({t, train, gen, grad_norm, eff});

        if (cfg.adaptive && cfg.per_layer_ema) {
            for (int j = 0; j < d; ++j) {
                ema_layers[j] = cfg.ema_alpha * ema_layers[j] +
                                (1.0 - cfg.ema_alpha) * grad.layers[j].squaredNorm();
                const double eff_j = cfg.base_lr / (std::sqrt(ema_layers[j]) + cfg.ema_softening);
                if (cfg.momentum > 0.0) {
                    velocity[j] = cfg.momentum * velocity[j] + grad.layers[j];
                    ws.layers[j] -= eff_j * velocity[j];
                } else {
                    ws.layers[j] -= eff_j * grad.layers[j];
                }
            }
        } else if (cfg.momentum > 0.0) {
            for (int j = 0; j < d; ++j) {
                velocity[j] = cfg.momentum * velocity[j] + grad.layers[j];
                ws.layers[j] -= eff * velocity[j];
            }
        } else {
            for (int j = 0; j < d; ++j) ws.layers[j] -= eff * grad.layers[j];
        }
    }

    double train, gen;
    losses_of_current(train, gen);
    double grad_sq = 0.0;
    if (!trace.aborted) {
        const WeightSetting grad = loss_gradient(spec, ws, eval);
        for (const auto& g : grad.layers) grad_sq += g.squaredNorm();
    }
    const std::int64_t final_epoch = trace.aborted ? trace.abort_epoch : cfg.epochs;
    trace.rows.push_back({final_epoch, train, gen, std::sqrt(grad_sq), last_eff});
    trace.final_weights = std::move(ws);
    trace.final_train_loss = train;
    trace.final_gen_loss = gen;
    return trace;
}

void trace_to_csv(const GdTrace& trace, std::ostream& out) {
    out << "epoch,train_loss,gen_loss,grad_norm,eff_lr\n";
    char line[192];
    for (const auto& row : trace.rows) {
        std::snprintf(line, sizeof(line), "%lld,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(row.epoch), row.train_loss, row.gen_loss,
                      row.grad_norm, row.eff_lr);
        out << line;
    }
}

}  // namespace mflab
