#include "mflab/guess_check.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <thread>

#include "mflab/parallel.hpp"
#include "mflab/rng.hpp"

namespace mflab {

namespace {

constexpr std::uint64_t kGncTag = 0x676e63ull;     // "gnc"
constexpr std::uint64_t kPriorTag = 0x7072696full; // "prio"

// Partial sums are pinned to a fixed grid of kAccumBlock consecutive
// samples, so the floating-point grouping of the final reduction is
// independent of batch size and worker count.
constexpr std::uint64_t kAccumBlock = 1024;

struct ChunkSummary {
    std::uint64_t drawn = 0;
    std::uint64_t accepted = 0;
    std::uint64_t screen_accepted = 0;
    std::uint64_t discrepancies = 0;
    std::vector<double> kept_losses;
    std::vector<std::uint64_t> kept_indices;
};

/// Per-worker f64 sampler state: preallocated layers and buffers.
struct SamplerF64 {
    const FactorizationSpec& spec;
    const PriorSpec& prior;
    std::vector<Matrix> layers;
    Matrix buf_a, buf_b, prod, out;

    SamplerF64(const FactorizationSpec& s, const PriorSpec& p) : spec(s), prior(p) {
        layers.resize(spec.depth);
        for (int j = 0; j < spec.depth; ++j)
            layers[j].resize(spec.layer_rows(j), spec.layer_cols(j));
    }

    const Matrix& draw(std::uint64_t key) {
        rng::Stream stream(key);
        draw_prior_into(spec, prior, stream, layers, buf_a, buf_b, prod);
        forward_into(spec, layers, buf_a, buf_b, out);
        return out;
    }
};

/// f32 screen: the draws are replayed in f64 for stream parity, cast to
/// f32, and the forward map plus training loss run in f32.
struct SamplerF32 {
    const FactorizationSpec& spec;
    const PriorSpec& prior;
    std::vector<Matrix> layers64;
    std::vector<DenseMatrix<float>> layers32;
    Matrix buf_a64, buf_b64, prod64;
    DenseMatrix<float> buf_a, buf_b, out;

    SamplerF32(const FactorizationSpec& s, const PriorSpec& p) : spec(s), prior(p) {
        layers64.resize(spec.depth);
        layers32.resize(spec.depth);
        for (int j = 0; j < spec.depth; ++j) {
            layers64[j].resize(spec.layer_rows(j), spec.layer_cols(j));
            layers32[j].resize(spec.layer_rows(j), spec.layer_cols(j));
        }
    }

    const DenseMatrix<float>& draw(std::uint64_t key) {
        rng::Stream stream(key);
        draw_prior_into(spec, prior, stream, layers64, buf_a64, buf_b64, prod64);
        for (int j = 0; j < spec.depth; ++j) layers32[j] = layers64[j].cast<float>();
        forward_into(spec, layers32, buf_a, buf_b, out);
        return out;
    }
};

struct EvalF32 {
    Eigen::MatrixXf meas;
    Eigen::VectorXf labels;

    explicit EvalF32(const LossEvaluator& eval)
        : meas(eval.meas.cast<float>()), labels(eval.labels.cast<float>()) {}

    float train(const DenseMatrix<float>& w) const {
        Eigen::Map<const Eigen::VectorXf> v(w.data(), w.size());
        return (meas * v - labels).squaredNorm() / static_cast<float>(labels.size());
    }
};

}  // namespace

std::string GncReport::to_json() const {
    nlohmann::json j;
    j["total_drawn"] = total_drawn;
    j["accepted_count"] = accepted_count;
    j["acceptance_rate"] = acceptance_rate;
    if (has_mean) {
        j["mean_gen_loss"] = mean_gen_loss;
        j["mean_train_loss"] = mean_train_loss;
    } else {
        j["mean_gen_loss"] = nullptr;
        j["mean_train_loss"] = nullptr;
    }
    j["zero_acceptances"] = !has_mean;
    j["retained"] = accepted_gen_losses.size();
    j["accepted_gen_losses"] = accepted_gen_losses;
    j["accepted_indices"] = accepted_indices;
    j["f32_screen_accepted"] = f32_screen_accepted;
    j["f32_discrepancies"] = f32_discrepancies;
    return j.dump(2);
}

std::uint64_t gnc_sample_key(std::uint64_t seed, std::uint64_t index) {
    return rng::derive(seed, kGncTag, index);
}

std::uint64_t prior_sample_key(std::uint64_t seed, std::uint64_t index) {
    return rng::derive(seed, kPriorTag, index);
}

WeightSetting gnc_sample(const FactorizationSpec& spec, const PriorSpec& prior,
                         std::uint64_t seed, std::uint64_t index) {
    return sample_prior(spec, prior, gnc_sample_key(seed, index));
}

GncReport run_gnc(const FactorizationSpec& spec, const ProblemInstance& inst,
                  const GncConfig& cfg, std::uint64_t seed) {
    spec.validate();
    if (cfg.num_samples < 1) throw std::invalid_argument("num_samples must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(cfg.eps_train > 0.0)) throw std::invalid_argument("eps_train must be positive");
    if (spec.out_dim != inst.meta.m || spec.in_dim != inst.meta.m_prime)
        throw std::invalid_argument("spec dimensions disagree with instance");

    const LossEvaluator eval(inst);
    const bool f32 = cfg.precision == Precision::f32;

    std::atomic<std::uint64_t> progress{0};
    std::atomic<bool> done{false};
    std::thread monitor;
    if (cfg.verbose) {
        monitor = std::thread([&] {
            const auto t0 = std::chrono::steady_clock::now();
            while (!done.load()) {
                std::this_thread::sleep_for(std::chrono::seconds(2));
                const double secs =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
                const std::uint64_t n = progress.load();
                if (n == 0 || secs <= 0) continue;
                std::cerr << "gnc: " << n << "/" << cfg.num_samples << " samples, "
                          << static_cast<std::uint64_t>(n / secs) << "/s\n";
            }
        });
    }

    // Block-resolved partial sums; workers touch disjoint slots.
    const std::uint64_t nblocks = (cfg.num_samples + kAccumBlock - 1) / kAccumBlock;
    std::vector<double> gen_block(nblocks, 0.0), train_block(nblocks, 0.0);

    auto run_chunk = [&](std::uint64_t block_lo, std::uint64_t block_hi, std::uint64_t) {
        ChunkSummary s;
        auto accumulate = [&](std::uint64_t i, double tl, double gl) {
            ++s.accepted;
            const std::uint64_t block = i / kAccumBlock;
            train_block[block] += tl;
            gen_block[block] += gl;
            s.kept_losses.push_back(gl);
            s.kept_indices.push_back(i);
        };
        const std::uint64_t lo = block_lo * kAccumBlock;
        const std::uint64_t hi = std::min(cfg.num_samples, block_hi * kAccumBlock);
        if (f32) {
            SamplerF32 sampler(spec, cfg.prior);
            const EvalF32 eval32(eval);
            SamplerF64 verifier(spec, cfg.prior);
            const float eps32 = static_cast<float>(cfg.eps_train);
            for (std::uint64_t i = lo; i < hi; ++i) {
                const std::uint64_t key = gnc_sample_key(seed, i);
                const auto& w32 = sampler.draw(key);
                ++s.drawn;
                if (!(eval32.train(w32) < eps32)) continue;
                ++s.screen_accepted;
                const Matrix& w64 = verifier.draw(key);
                const double tl = eval.train(w64);
                if (!(tl < cfg.eps_train)) {
                    ++s.discrepancies;
                    continue;
                }
                accumulate(i, tl, eval.gen(w64));
            }
        } else {
            SamplerF64 sampler(spec, cfg.prior);
            for (std::uint64_t i = lo; i < hi; ++i) {
                const Matrix& w = sampler.draw(gnc_sample_key(seed, i));
                ++s.drawn;
                const double tl = eval.train(w);
                if (!(tl < cfg.eps_train)) continue;
                accumulate(i, tl, eval.gen(w));
            }
        }
        progress.fetch_add(s.drawn, std::memory_order_relaxed);
        return s;
    };

    // A work unit spans whole accumulation blocks; batch_size only sets
    // its granularity.
    const std::uint64_t blocks_per_unit =
        std::max<std::uint64_t>(1, (cfg.batch_size + kAccumBlock - 1) / kAccumBlock);
    const auto chunks =
        parallel_chunks<ChunkSummary>(nblocks, blocks_per_unit, cfg.threads, run_chunk);
    done.store(true);
    if (monitor.joinable()) monitor.join();

    // In-order merge: counts are exact, sums fold over the fixed block
    // grid, and retained losses are the accepted samples with the lowest
    // indices (an i.i.d. subset).
    GncReport rep;
    for (const auto& s : chunks) {
        rep.total_drawn += s.drawn;
        rep.accepted_count += s.accepted;
        rep.f32_screen_accepted += s.screen_accepted;
        rep.f32_discrepancies += s.discrepancies;
        for (std::size_t i = 0;
             i < s.kept_losses.size() && rep.accepted_gen_losses.size() < cfg.keep_cap; ++i) {
            rep.accepted_gen_losses.push_back(s.kept_losses[i]);
            rep.accepted_indices.push_back(s.kept_indices[i]);
        }
    }
    double gen_sum = 0.0, train_sum = 0.0;
    for (std::uint64_t b = 0; b < nblocks; ++b) {
        gen_sum += gen_block[b];
        train_sum += train_block[b];
    }
    rep.acceptance_rate =
        static_cast<double>(rep.accepted_count) / static_cast<double>(rep.total_drawn);
    if (rep.accepted_count > 0) {
        rep.has_mean = true;
        rep.mean_gen_loss = gen_sum / static_cast<double>(rep.accepted_count);
        rep.mean_train_loss = train_sum / static_cast<double>(rep.accepted_count);
    }
    return rep;
}

std::vector<double> run_prior_baseline(const FactorizationSpec& spec,
                                       const ProblemInstance& inst, const PriorSpec& prior,
                                       int trials, std::uint64_t seed) {
    spec.validate();
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    const LossEvaluator eval(inst);
    SamplerF64 sampler(spec, prior);
    std::vector<double> losses;
    losses.reserve(trials);
    for (int t = 0; t < trials; ++t)
        losses.push_back(
            eval.gen(sampler.draw(prior_sample_key(seed, static_cast<std::uint64_t>(t)))));
    return losses;
}

}  // namespace mflab
