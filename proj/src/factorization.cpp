#include "mflab/factorization.hpp"

#include "mflab/rng.hpp"

namespace mflab {

std::string to_string(ActivationKind kind) {
    switch (kind) {
        case ActivationKind::linear: return "linear";
        case ActivationKind::tanh: return "tanh";
        case ActivationKind::leaky_relu: return "leaky_relu";
    }
    return "linear";
}

ActivationKind activation_kind_from_string(const std::string& s) {
    if (s == "linear") return ActivationKind::linear;
    if (s == "tanh") return ActivationKind::tanh;
    if (s == "leaky_relu" || s == "lrelu") return ActivationKind::leaky_relu;
    throw std::invalid_argument("unknown activation: " + s);
}

void check_shapes(const FactorizationSpec& spec, const WeightSetting& ws) {
    spec.validate();
    if (static_cast<int>(ws.layers.size()) != spec.depth)
        throw std::invalid_argument("weight setting has wrong depth");
    for (int j = 0; j < spec.depth; ++j)
        if (ws.layers[j].rows() != spec.layer_rows(j) || ws.layers[j].cols() != spec.layer_cols(j))
            throw std::invalid_argument("layer " + std::to_string(j + 1) + " has wrong shape");
}

Matrix forward(const FactorizationSpec& spec, const WeightSetting& ws) {
    check_shapes(spec, ws);
    Matrix buf_a, buf_b, out;
    forward_into(spec, ws.layers, buf_a, buf_b, out);
    return out;
}

void draw_prior_into(const FactorizationSpec& spec, const PriorSpec& prior,
                     rng::Stream& stream, std::vector<Matrix>& layers, Matrix& buf_a,
                     Matrix& buf_b, Matrix& prod_buf) {
    for (int j = 0; j < spec.depth; ++j) {
        const int rows = spec.layer_rows(j);
        const int cols = spec.layer_cols(j);
        const double scale = 1.0 / std::sqrt(static_cast<double>(cols));
        Matrix& w = layers[j];
        if (prior.base == BaseKind::gaussian) {
            const double sd = std::sqrt(prior.param) * scale;
            for (int c = 0; c < cols; ++c)
                for (int r = 0; r < rows; ++r) w(r, c) = sd * stream.normal();
        } else {
            const double bound = prior.param * scale;
            for (int c = 0; c < cols; ++c)
                for (int r = 0; r < rows; ++r) w(r, c) = stream.uniform(-bound, bound);
        }
    }
    if (prior.normalize) {
        linear_product_into(spec, layers, buf_a, buf_b, prod_buf);
        const double divisor =
            std::pow(prod_buf.norm() + prior.eps_norm, 1.0 / static_cast<double>(spec.depth));
        for (auto& w : layers) w /= divisor;
    }
}

WeightSetting sample_prior(const FactorizationSpec& spec, const PriorSpec& prior,
                           std::uint64_t seed) {
    spec.validate();
    rng::Stream stream(seed);
    WeightSetting ws;
    ws.layers.resize(spec.depth);
    for (int j = 0; j < spec.depth; ++j)
        ws.layers[j].resize(spec.layer_rows(j), spec.layer_cols(j));
    Matrix buf_a, buf_b, prod;
    draw_prior_into(spec, prior, stream, ws.layers, buf_a, buf_b, prod);
    return ws;
}

double fact_train_loss(const FactorizationSpec& spec, const WeightSetting& ws,
                       const ProblemInstance& inst) {
    return train_loss(forward(spec, ws), inst);
}

double fact_gen_loss(const FactorizationSpec& spec, const WeightSetting& ws,
                     const ProblemInstance& inst) {
    return gen_loss(forward(spec, ws), inst);
}

WeightSetting loss_gradient(const FactorizationSpec& spec, const WeightSetting& ws,
                            const ProblemInstance& inst) {
    return loss_gradient(spec, ws, LossEvaluator(inst));
}

WeightSetting loss_gradient(const FactorizationSpec& spec, const WeightSetting& ws,
                            const LossEvaluator& eval) {
    check_shapes(spec, ws);
    const int d = spec.depth;
    const Activation& act = spec.activation;

    // Forward pass keeping pre-activations Z_j and activations H_j:
    // Z_1 = W_1, H_j = act(Z_j), Z_j = W_j H_{j-1}, W = W_d H_{d-1}.
    std::vector<Matrix> pre(d - 1), post(d - 1);
    pre[0] = ws.layers[0];
    post[0] = pre[0].unaryExpr([&act](double x) { return act.apply(x); });
    for (int j = 1; j < d - 1; ++j) {
        pre[j].noalias() = ws.layers[j] * post[j - 1];
        post[j] = pre[j].unaryExpr([&act](double x) { return act.apply(x); });
    }
    Matrix w_out;
    w_out.noalias() = ws.layers[d - 1] * post[d - 2];

    // dL/dW for the sensing loss, reshaped to m x m'.
    const int n = static_cast<int>(eval.labels.size());
    const Eigen::VectorXd resid = eval.meas * LossEvaluator::vec(w_out) - eval.labels;
    const Eigen::VectorXd g_flat = (2.0 / n) * (eval.meas.transpose() * resid);
    const Matrix g_out = Eigen::Map<const Matrix>(g_flat.data(), spec.out_dim, spec.in_dim);

    WeightSetting grad;
    grad.layers.resize(d);
    grad.layers[d - 1].noalias() = g_out * post[d - 2].transpose();
    Matrix delta;
    delta.noalias() = ws.layers[d - 1].transpose() * g_out;  // dL/dH_{d-1}
    for (int j = d - 2; j >= 1; --j) {
        const Matrix dz =
            delta.array() * pre[j].unaryExpr([&act](double x) { return act.deriv(x); }).array();
        grad.layers[j].noalias() = dz * post[j - 1].transpose();
        delta.noalias() = ws.layers[j].transpose() * dz;
    }
    grad.layers[0] =
        delta.array() * pre[0].unaryExpr([&act](double x) { return act.deriv(x); }).array();
    return grad;
}

}  // namespace mflab
