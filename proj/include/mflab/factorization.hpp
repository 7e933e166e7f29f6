#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "mflab/problem.hpp"
#include "mflab/rng.hpp"

namespace mflab {

enum class ActivationKind { linear, tanh, leaky_relu };

std::string to_string(ActivationKind kind);
ActivationKind activation_kind_from_string(const std::string& s);

struct Activation {
    ActivationKind kind = ActivationKind::linear;
    double slope = 0.2;  // leaky_relu only

    double apply(double x) const {
        switch (kind) {
            case ActivationKind::linear: return x;
            case ActivationKind::tanh: return std::tanh(x);
            case ActivationKind::leaky_relu: return x >= 0.0 ? x : slope * x;
        }
        return x;
    }

    /// Derivative; for leaky_relu the value at exactly 0 is 1.
    double deriv(double x) const {
        switch (kind) {
            case ActivationKind::linear: return 1.0;
            case ActivationKind::tanh: {
                const double t = std::tanh(x);
                return 1.0 - t * t;
            }
            case ActivationKind::leaky_relu: return x >= 0.0 ? 1.0 : slope;
        }
        return 1.0;
    }
};

enum class Precision { f64, f32 };

/// Shape of a depth-d width-k factorization of an m x m' matrix:
/// W_1 is k x m', the middle layers are k x k, W_d is m x k.
struct FactorizationSpec {
    int depth = 2;
    int width = 5;
    int out_dim = 5;   // m
    int in_dim = 5;    // m'
    Activation activation{};
    Precision precision = Precision::f64;

    int layer_rows(int j) const { return j == depth - 1 ? out_dim : width; }
    int layer_cols(int j) const { return j == 0 ? in_dim : width; }

    void validate() const {
        if (depth < 2) throw std::invalid_argument("factorization depth must be >= 2");
        if (out_dim < 1 || in_dim < 1) throw std::invalid_argument("bad dimensions");
        if (width < std::min(out_dim, in_dim))
            throw std::invalid_argument("width below min(m, m'): not overparameterized");
    }
};

struct WeightSetting {
    std::vector<Matrix> layers;  // layers[j] is W_{j+1}, shapes per FactorizationSpec
};

enum class BaseKind { gaussian, uniform };

/// Prior over weight settings: i.i.d. base draws per entry, Kaiming-scaled
/// by 1/sqrt(columns of the layer); optionally normalized so the *linear*
/// product of the layers has (softened) unit Frobenius norm.
struct PriorSpec {
    BaseKind base = BaseKind::gaussian;
    double param = 1.0;       // gaussian: variance nu; uniform: bound a of U(-a, a)
    bool normalize = false;
    double eps_norm = 1e-6;   // softening added to the norm before the d-th root
};

template <typename Scalar>
using DenseMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Applies layers left to right with the activation after every layer
/// except the last, writing the m x m' product into `out`. `buf_a`/`buf_b`
/// are scratch; all callers share this routine so results are
/// bit-identical across the library.
template <typename Scalar>
void forward_into(const FactorizationSpec& spec, const std::vector<DenseMatrix<Scalar>>& layers,
                  DenseMatrix<Scalar>& buf_a, DenseMatrix<Scalar>& buf_b,
                  DenseMatrix<Scalar>& out) {
    const int d = spec.depth;
    const Activation& act = spec.activation;
    auto activate = [&act](DenseMatrix<Scalar>& h) {
        if (act.kind == ActivationKind::linear) return;
        Scalar* p = h.data();
        const Eigen::Index n = h.size();
        if (act.kind == ActivationKind::tanh) {
            for (Eigen::Index i = 0; i < n; ++i) p[i] = std::tanh(p[i]);
        } else {
            const Scalar c = static_cast<Scalar>(act.slope);
            for (Eigen::Index i = 0; i < n; ++i)
                p[i] = p[i] >= Scalar(0) ? p[i] : c * p[i];
        }
    };

    buf_a = layers[0];
    activate(buf_a);
    for (int j = 1; j < d - 1; ++j) {
        buf_b.noalias() = layers[j] * buf_a;
        activate(buf_b);
        std::swap(buf_a, buf_b);
    }
    out.noalias() = layers[d - 1] * buf_a;
}

/// Plain product W_d ... W_1 (no activation), used for prior normalization.
template <typename Scalar>
void linear_product_into(const FactorizationSpec& spec,
                         const std::vector<DenseMatrix<Scalar>>& layers,
                         DenseMatrix<Scalar>& buf_a, DenseMatrix<Scalar>& buf_b,
                         DenseMatrix<Scalar>& out) {
    const int d = spec.depth;
    buf_a = layers[0];
    for (int j = 1; j < d - 1; ++j) {
        buf_b.noalias() = layers[j] * buf_a;
        std::swap(buf_a, buf_b);
    }
    out.noalias() = layers[d - 1] * buf_a;
}

/// The factorized matrix (activation after layers 1..d-1, never after the
/// last).
Matrix forward(const FactorizationSpec& spec, const WeightSetting& ws);

/// Draws a weight setting from the prior. Entries are filled layer by
/// layer, column-major within a layer, from the given stream seed.
WeightSetting sample_prior(const FactorizationSpec& spec, const PriorSpec& prior,
                           std::uint64_t seed);

/// Fills pre-shaped layers with prior draws from an open stream and
/// applies normalization. sample_prior and the bulk samplers share this,
/// so a sampler draw replays exactly from its stream key.
void draw_prior_into(const FactorizationSpec& spec, const PriorSpec& prior,
                     rng::Stream& stream, std::vector<Matrix>& layers, Matrix& buf_a,
                     Matrix& buf_b, Matrix& prod_buf);

double fact_train_loss(const FactorizationSpec& spec, const WeightSetting& ws,
                       const ProblemInstance& inst);
double fact_gen_loss(const FactorizationSpec& spec, const WeightSetting& ws,
                     const ProblemInstance& inst);

/// Exact reverse-mode gradient of the factorization training loss with
/// respect to every layer.
WeightSetting loss_gradient(const FactorizationSpec& spec, const WeightSetting& ws,
                            const ProblemInstance& inst);
WeightSetting loss_gradient(const FactorizationSpec& spec, const WeightSetting& ws,
                            const LossEvaluator& eval);

void check_shapes(const FactorizationSpec& spec, const WeightSetting& ws);

}  // namespace mflab
