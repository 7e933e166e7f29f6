#include "mflab/problem.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mflab/rng.hpp"

namespace mflab {

namespace {

constexpr double kGsDropTol = 1e-10;  // post-projection norm below this is "spanned"

Matrix gaussian_matrix(int rows, int cols, rng::Stream& stream) {
    Matrix out(rows, cols);
    for (int c = 0; c < cols; ++c)
        for (int r = 0; r < rows; ++r) out(r, c) = stream.normal();
    return out;
}

}  // namespace

std::string to_string(MeasurementKind kind) {
    return kind == MeasurementKind::gaussian ? "gaussian" : "indicator";
}

MeasurementKind measurement_kind_from_string(const std::string& s) {
    if (s == "gaussian") return MeasurementKind::gaussian;
    if (s == "indicator") return MeasurementKind::indicator;
    throw std::invalid_argument("unknown measurement kind: " + s);
}

Matrix make_ground_truth(int m, int m_prime, int r, double b, std::uint64_t seed) {
    if (r < 1 || r > std::min(m, m_prime))
        throw std::invalid_argument("ground truth rank out of range");
    if (b <= 0.0) throw std::invalid_argument("ground truth norm must be positive");
    rng::Stream stream(rng::derive(seed, 0x67726f756e64ull));  // "ground"
    for (;;) {
        const Matrix u = gaussian_matrix(m, r, stream);
        const Matrix v = gaussian_matrix(r, m_prime, stream);
        Matrix w = u * v;
        const double norm = w.norm();
        if (norm < 1e-30) continue;  // probability-zero degenerate draw
        w *= b / norm;
        return w;
    }
}

std::vector<Matrix> make_measurements(int m, int m_prime, int n, MeasurementKind kind,
                                      std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("need at least one measurement");
    rng::Stream stream(rng::derive(seed, 0x6d656173ull));  // "meas"
    std::vector<Matrix> out;
    out.reserve(n);
    if (kind == MeasurementKind::gaussian) {
        for (int i = 0; i < n; ++i) {
            Matrix a = gaussian_matrix(m, m_prime, stream);
            const double norm = a.norm();
            if (norm < 1e-30) {
                --i;
                continue;
            }
            a /= norm;
            out.push_back(std::move(a));
        }
        return out;
    }
    const int cells = m * m_prime;
    if (n > cells) throw std::invalid_argument("too many indicator measurements");
    // Fisher-Yates prefix over the cell grid: uniform without replacement.
    std::vector<int> idx(cells);
    std::iota(idx.begin(), idx.end(), 0);
    for (int i = 0; i < n; ++i) {
        const int j = i + static_cast<int>(stream.below(cells - i));
        std::swap(idx[i], idx[j]);
        Matrix a = Matrix::Zero(m, m_prime);
        a(idx[i] / m_prime, idx[i] % m_prime) = 1.0;
        out.push_back(std::move(a));
    }
    return out;
}

std::vector<Matrix> make_complement_basis(const std::vector<Matrix>& measurements) {
    if (measurements.empty()) throw std::invalid_argument("empty measurement list");
    const int m = static_cast<int>(measurements.front().rows());
    const int mp = static_cast<int>(measurements.front().cols());
    for (const auto& a : measurements)
        if (a.rows() != m || a.cols() != mp)
            throw std::invalid_argument("measurement shapes differ");
    const int dim = m * mp;

    // Modified Gram-Schmidt with one re-orthogonalization pass over the
    // concatenation [measurements..., E_11, ..., E_mm']. Vectors surviving
    // the measurement block are the complement basis.
    std::vector<Eigen::VectorXd> ortho;
    ortho.reserve(dim);
    std::vector<Matrix> basis;

    auto push = [&](Eigen::VectorXd v, bool from_measurements) {
        for (int pass = 0; pass < 2; ++pass)
            for (const auto& q : ortho) v -= q.dot(v) * q;
        const double norm = v.norm();
        if (norm < kGsDropTol) return;
        v /= norm;
        ortho.push_back(v);
        if (!from_measurements) {
            Matrix b(m, mp);
            for (int i = 0; i < dim; ++i) b(i / mp, i % mp) = v(i);
            basis.push_back(std::move(b));
        }
    };

    for (const auto& a : measurements) push(flatten(a), true);
    for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
        e(i) = 1.0;
        push(std::move(e), false);
    }
    return basis;
}

ProblemInstance make_instance(int m, int m_prime, int r, double b, int n,
                              MeasurementKind kind, std::uint64_t seed) {
    ProblemInstance inst;
    inst.ground_truth = make_ground_truth(m, m_prime, r, b, seed);
    inst.measurements = make_measurements(m, m_prime, n, kind, seed);
    inst.labels.resize(n);
    for (int i = 0; i < n; ++i)
        inst.labels(i) = frob_inner(inst.measurements[i], inst.ground_truth);
    inst.complement_basis = make_complement_basis(inst.measurements);
    inst.meta = {m, m_prime, r, b, n, kind, seed};
    return inst;
}

double train_loss(const Matrix& w, const ProblemInstance& inst) {
    if (w.rows() != inst.ground_truth.rows() || w.cols() != inst.ground_truth.cols())
        throw std::invalid_argument("train_loss: shape mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < inst.measurements.size(); ++i) {
        const double r = frob_inner(inst.measurements[i], w) - inst.labels(static_cast<int>(i));
        acc += r * r;
    }
    return acc / static_cast<double>(inst.measurements.size());
}

double gen_loss(const Matrix& w, const ProblemInstance& inst) {
    if (w.rows() != inst.ground_truth.rows() || w.cols() != inst.ground_truth.cols())
        throw std::invalid_argument("gen_loss: shape mismatch");
    if (inst.complement_basis.empty())
        throw std::runtime_error("generalization undefined: measurements span the space");
    double acc = 0.0;
    for (const auto& a : inst.complement_basis) {
        const double r = frob_inner(a, w) - frob_inner(a, inst.ground_truth);
        acc += r * r;
    }
    return acc / static_cast<double>(inst.complement_basis.size());
}

Eigen::VectorXd flatten(const Matrix& w) {
    const int m = static_cast<int>(w.rows());
    const int mp = static_cast<int>(w.cols());
    Eigen::VectorXd v(m * mp);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < mp; ++j) v(i * mp + j) = w(i, j);
    return v;
}

LossEvaluator::LossEvaluator(const ProblemInstance& inst) {
    const int n = static_cast<int>(inst.measurements.size());
    const int dim = static_cast<int>(inst.ground_truth.size());
    meas.resize(n, dim);
    for (int i = 0; i < n; ++i) meas.row(i) = vec(inst.measurements[i]).transpose();
    labels = inst.labels;
    const int nb = static_cast<int>(inst.complement_basis.size());
    basis.resize(nb, dim);
    for (int i = 0; i < nb; ++i) basis.row(i) = vec(inst.complement_basis[i]).transpose();
    basis_ref = basis * vec(inst.ground_truth);
}

RipEstimate estimate_rip(const std::vector<Matrix>& measurements, int order,
                         std::int64_t samples, std::uint64_t seed) {
    if (order < 1) throw std::invalid_argument("rip order must be >= 1");
    if (samples < 1) throw std::invalid_argument("rip needs at least one sample");
    if (measurements.empty()) throw std::invalid_argument("empty measurement list");
    const int m = static_cast<int>(measurements.front().rows());
    const int mp = static_cast<int>(measurements.front().cols());

    Eigen::MatrixXd meas(measurements.size(), m * mp);
    for (std::size_t i = 0; i < measurements.size(); ++i)
        meas.row(static_cast<int>(i)) = LossEvaluator::vec(measurements[i]).transpose();

    double worst = 0.0;
    for (std::int64_t s = 0; s < samples; ++s) {
        rng::Stream stream(rng::derive(seed, 0x726970ull, static_cast<std::uint64_t>(s)));
        const Matrix u = gaussian_matrix(m, order, stream);
        const Matrix v = gaussian_matrix(order, mp, stream);
        Matrix w = u * v;
        const double norm = w.norm();
        if (norm < 1e-30) continue;
        w /= norm;
        const double image_sq = (meas * LossEvaluator::vec(w)).squaredNorm();
        worst = std::max(worst, std::abs(image_sq - 1.0));
    }
    return RipEstimate{order, worst, samples};
}

namespace {

nlohmann::json matrix_to_json(const Matrix& w) {
    nlohmann::json arr = nlohmann::json::array();
    for (int i = 0; i < w.rows(); ++i)
        for (int j = 0; j < w.cols(); ++j) arr.push_back(w(i, j));
    return arr;
}

Matrix matrix_from_json(const nlohmann::json& arr, int rows, int cols) {
    if (static_cast<int>(arr.size()) != rows * cols)
        throw std::invalid_argument("matrix payload has the wrong length");
    Matrix w(rows, cols);
    int idx = 0;
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) w(i, j) = arr[idx++].get<double>();
    return w;
}

}  // namespace

std::string instance_to_json(const ProblemInstance& inst) {
    nlohmann::json j;
    j["meta"] = {{"m", inst.meta.m},
                 {"m_prime", inst.meta.m_prime},
                 {"r", inst.meta.r},
                 {"b", inst.meta.b},
                 {"n", inst.meta.n},
                 {"kind", to_string(inst.meta.kind)},
                 {"seed", inst.meta.seed}};
    j["ground_truth"] = matrix_to_json(inst.ground_truth);
    j["measurements"] = nlohmann::json::array();
    for (const auto& a : inst.measurements) j["measurements"].push_back(matrix_to_json(a));
    j["labels"] = nlohmann::json::array();
    for (int i = 0; i < inst.labels.size(); ++i) j["labels"].push_back(inst.labels(i));
    j["complement_basis"] = nlohmann::json::array();
    for (const auto& a : inst.complement_basis)
        j["complement_basis"].push_back(matrix_to_json(a));
    return j.dump(2);
}

ProblemInstance instance_from_json(const std::string& text) {
    const nlohmann::json j = nlohmann::json::parse(text);
    ProblemInstance inst;
    const auto& meta = j.at("meta");
    inst.meta.m = meta.at("m").get<int>();
    inst.meta.m_prime = meta.at("m_prime").get<int>();
    inst.meta.r = meta.at("r").get<int>();
    inst.meta.b = meta.at("b").get<double>();
    inst.meta.n = meta.at("n").get<int>();
    inst.meta.kind = measurement_kind_from_string(meta.at("kind").get<std::string>());
    inst.meta.seed = meta.at("seed").get<std::uint64_t>();

    const int m = inst.meta.m;
    const int mp = inst.meta.m_prime;
    inst.ground_truth = matrix_from_json(j.at("ground_truth"), m, mp);
    for (const auto& a : j.at("measurements"))
        inst.measurements.push_back(matrix_from_json(a, m, mp));
    const auto& labels = j.at("labels");
    inst.labels.resize(static_cast<int>(labels.size()));
    for (int i = 0; i < inst.labels.size(); ++i) inst.labels(i) = labels[i].get<double>();
    for (const auto& a : j.at("complement_basis"))
        inst.complement_basis.push_back(matrix_from_json(a, m, mp));
    if (static_cast<int>(inst.measurements.size()) != inst.meta.n)
        throw std::invalid_argument("measurement count disagrees with meta");
    return inst;
}

}  // namespace mflab
