#include "mflab/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

#include "mflab/parallel.hpp"
#include "mflab/rng.hpp"

namespace mflab {

namespace {

constexpr std::uint64_t kInstanceTag = 0x696e7374ull;  // "inst"
constexpr std::uint64_t kCellTag = 0x63656c6cull;      // "cell"

int optimizer_id(OptimizerKind opt) {
    switch (opt) {
        case OptimizerKind::gnc: return 0;
        case OptimizerKind::gd: return 1;
        case OptimizerKind::prior: return 2;
    }
    return 0;
}

FactorizationSpec spec_for(const SweepConfig& cfg, int axis_value) {
    FactorizationSpec spec = cfg.spec;
    if (cfg.axis == SweepAxis::width)
        spec.width = axis_value;
    else
        spec.depth = axis_value;
    return spec;
}

std::vector<AggregateRow> aggregate_rows(
    const std::vector<int>& axis_values, const std::vector<OptimizerKind>& optimizers,
    const std::function<std::vector<double>(int, OptimizerKind, int&)>& defined_losses) {
    std::vector<AggregateRow> out;
    for (int v : axis_values) {
        for (OptimizerKind opt : optimizers) {
            AggregateRow row;
            row.axis_value = v;
            row.optimizer = opt;
            int undefined = 0;
            std::vector<double> losses = defined_losses(v, opt, undefined);
            row.defined_cells = static_cast<int>(losses.size());
            row.undefined_cells = undefined;
            if (!losses.empty()) {
                row.median = quantile_type7(losses, 0.5);
                row.q25 = quantile_type7(losses, 0.25);
                row.q75 = quantile_type7(losses, 0.75);
            }
            out.push_back(row);
        }
    }
    return out;
}

}  // namespace

std::string to_string(OptimizerKind opt) {
    switch (opt) {
        case OptimizerKind::gnc: return "gnc";
        case OptimizerKind::gd: return "gd";
        case OptimizerKind::prior: return "prior";
    }
    return "gnc";
}

std::string to_string(SweepAxis axis) {
    return axis == SweepAxis::width ? "width" : "depth";
}

std::string to_string(CellStatus status) {
    switch (status) {
        case CellStatus::ok: return "ok";
        case CellStatus::zero_accept: return "zero_accept";
        case CellStatus::diverged: return "diverged";
        case CellStatus::skipped: return "skipped";
    }
    return "ok";
}

OptimizerKind optimizer_from_string(const std::string& s) {
    if (s == "gnc") return OptimizerKind::gnc;
    if (s == "gd") return OptimizerKind::gd;
    if (s == "prior") return OptimizerKind::prior;
    throw std::invalid_argument("unknown optimizer: " + s);
}

GdConfig gd_hyperparams(GdTable table, ActivationKind activation, int depth, GdConfig base) {
    const bool lrelu = activation == ActivationKind::leaky_relu;
    switch (table) {
        case GdTable::none:
            return base;
        case GdTable::width_setting:
            base.base_lr = 1e-4;
            base.init_scale = 1e-3;
            base.epochs = 100000;
            return base;
        case GdTable::depth_setting:
        case GdTable::depth_rank2_setting:
            base.base_lr = (lrelu && depth >= 5) ? 0.1 : 0.01;
            if (depth <= 4)
                base.init_scale = 0.001;
            else if (!lrelu)
                base.init_scale = depth <= 8 ? 0.1 : 0.2;
            else if (depth == 5)
                base.init_scale = 0.03;
            else if (depth <= 7)
                base.init_scale = 0.1;
            else if (depth <= 9)
                base.init_scale = 0.2;
            else
                base.init_scale = 0.8;
            if (lrelu || table == GdTable::depth_rank2_setting)
                base.epochs = 50000;
            else
                base.epochs = 20000;
            return base;
    }
    return base;
}

void SweepConfig::validate() const {
    if (axis_values.empty()) throw std::invalid_argument("axis_values must be nonempty");
    for (std::size_t i = 1; i < axis_values.size(); ++i)
        if (axis_values[i] <= axis_values[i - 1])
            throw std::invalid_argument("axis_values must be strictly increasing");
    if (trials < 1) throw std::invalid_argument("trials must be >= 1");
    if (optimizers.empty()) throw std::invalid_argument("no optimizers selected");
}

const SweepCell& SweepResult::cell(int axis_index, OptimizerKind opt, int trial) const {
    for (std::size_t o = 0; o < config.optimizers.size(); ++o)
        if (config.optimizers[o] == opt) return cells[axis_index][o][trial];
    throw std::invalid_argument("optimizer not part of this sweep");
}

std::vector<AggregateRow> SweepResult::aggregates() const {
    return aggregate_rows(
        config.axis_values, config.optimizers,
        [this](int axis_value, OptimizerKind opt, int& undefined) {
            const auto it = std::find(config.axis_values.begin(), config.axis_values.end(),
                                      axis_value);
            const int ia = static_cast<int>(it - config.axis_values.begin());
            std::vector<double> losses;
            for (int t = 0; t < config.trials; ++t) {
                const SweepCell& c = cell(ia, opt, t);
                if (c.status == CellStatus::ok && std::isfinite(c.gen_loss))
                    losses.push_back(c.gen_loss);
                else
                    ++undefined;
            }
            return losses;
        });
}

bool SweepResult::any_flagged_failure() const {
    for (const auto& per_axis : cells)
        for (const auto& per_opt : per_axis)
            for (const auto& c : per_opt)
                if (c.status == CellStatus::zero_accept || c.status == CellStatus::diverged)
                    return true;
    return false;
}

SweepResult run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    SweepResult result;
    result.config = cfg;

    const int na = static_cast<int>(cfg.axis_values.size());
    const int no = static_cast<int>(cfg.optimizers.size());
    result.cells.assign(na, std::vector<std::vector<SweepCell>>(
                                no, std::vector<SweepCell>(cfg.trials)));

    // All optimizers within a trial share the trial's instance.
    std::vector<ProblemInstance> instances;
    instances.reserve(cfg.trials);
    for (int t = 0; t < cfg.trials; ++t)
        instances.push_back(make_instance(
            cfg.instance.m, cfg.instance.m_prime, cfg.instance.r, cfg.instance.b,
            cfg.instance.n, cfg.instance.kind,
            rng::derive(cfg.master_seed, kInstanceTag, static_cast<std::uint64_t>(t))));

    auto cell_seed = [&](int axis_value, OptimizerKind opt, int trial) {
        return rng::derive(cfg.master_seed, kCellTag, static_cast<std::uint64_t>(axis_value),
                           static_cast<std::uint64_t>(optimizer_id(opt)),
                           static_cast<std::uint64_t>(trial));
    };

    // GD and single-draw prior cells are cheap enough to farm out whole;
    // each job writes its own fixed slot.
    struct LightJob {
        int ia, io, trial;
        OptimizerKind opt;
    };
    std::vector<LightJob> light;
    for (int ia = 0; ia < na; ++ia)
        for (int io = 0; io < no; ++io) {
            const OptimizerKind opt = cfg.optimizers[io];
            if (opt == OptimizerKind::gnc) continue;
            for (int t = 0; t < cfg.trials; ++t) light.push_back({ia, io, t, opt});
        }

    parallel_chunks<int>(
        light.size(), 1, cfg.threads, [&](std::uint64_t lo, std::uint64_t, std::uint64_t) {
            const LightJob& job = light[lo];
            const int axis_value = cfg.axis_values[job.ia];
            const FactorizationSpec spec = spec_for(cfg, axis_value);
            const ProblemInstance& inst = instances[job.trial];
            SweepCell& cell = result.cells[job.ia][job.io][job.trial];
            const std::uint64_t seed = cell_seed(axis_value, job.opt, job.trial);
            if (job.opt == OptimizerKind::gd) {
                if (cfg.gd_axis_cap > 0 && axis_value > cfg.gd_axis_cap) {
                    cell.status = CellStatus::skipped;
                    return 0;
                }
                const GdConfig gd_cfg =
                    gd_hyperparams(cfg.gd_table, spec.activation.kind, spec.depth, cfg.gd);
                const GdTrace trace = run_gd(spec, inst, gd_cfg, seed);
                if (trace.aborted || !std::isfinite(trace.final_gen_loss)) {
                    cell.status = CellStatus::diverged;
                } else {
                    cell.status = CellStatus::ok;
                    cell.gen_loss = trace.final_gen_loss;
                    cell.train_loss = trace.final_train_loss;
                }
            } else {
                const WeightSetting ws =
                    sample_prior(spec, cfg.gnc.prior, prior_sample_key(seed, 0));
                const Matrix w = forward(spec, ws);
                cell.status = CellStatus::ok;
                cell.gen_loss = gen_loss(w, inst);
                cell.train_loss = train_loss(w, inst);
            }
            return 0;
        });

    // G&C cells run one at a time, each internally parallel.
    for (int ia = 0; ia < na; ++ia)
        for (int io = 0; io < no; ++io) {
            if (cfg.optimizers[io] != OptimizerKind::gnc) continue;
            const int axis_value = cfg.axis_values[ia];
            const FactorizationSpec spec = spec_for(cfg, axis_value);
            GncConfig gnc_cfg = cfg.gnc;
            gnc_cfg.threads = cfg.threads;
            for (int t = 0; t < cfg.trials; ++t) {
                const GncReport rep = run_gnc(spec, instances[t], gnc_cfg,
                                              cell_seed(axis_value, OptimizerKind::gnc, t));
                SweepCell& cell = result.cells[ia][io][t];
                cell.accepted_count = rep.accepted_count;
                cell.total_drawn = rep.total_drawn;
                cell.accepted_gen_losses = rep.accepted_gen_losses;
                if (rep.has_mean) {
                    cell.status = CellStatus::ok;
                    cell.gen_loss = rep.mean_gen_loss;     // per-trial mean of accepted
                    cell.train_loss = rep.mean_train_loss;
                } else {
                    cell.status = CellStatus::zero_accept;
                }
            }
        }

    return result;
}

void emit_csv(const SweepResult& result, std::ostream& out) {
    const SweepConfig& cfg = result.config;
    std::uint64_t hash = rng::derive(cfg.master_seed, cfg.axis_values.size(), cfg.trials,
                                     static_cast<std::uint64_t>(cfg.axis == SweepAxis::depth),
                                     static_cast<std::uint64_t>(cfg.gnc.num_samples));
    char buf[256];
    std::snprintf(buf, sizeof(buf), "# sweep=%s axis=%s master_seed=%llu config_hash=%016llx\n",
                  cfg.name.c_str(), to_string(cfg.axis).c_str(),
                  static_cast<unsigned long long>(cfg.master_seed),
                  static_cast<unsigned long long>(hash));
    out << buf;
    out << "axis,axis_value,optimizer,trial,gen_loss,train_loss,status\n";
    auto num = [](double v) {
        if (!std::isfinite(v)) return std::string();
        char b[40];
        std::snprintf(b, sizeof(b), "%.17g", v);
        return std::string(b);
    };
    for (std::size_t ia = 0; ia < cfg.axis_values.size(); ++ia)
        for (std::size_t io = 0; io < cfg.optimizers.size(); ++io)
            for (int t = 0; t < cfg.trials; ++t) {
                const SweepCell& c = result.cells[ia][io][t];
                out << to_string(cfg.axis) << ',' << cfg.axis_values[ia] << ','
                    << to_string(cfg.optimizers[io]) << ',' << t << ',' << num(c.gen_loss)
                    << ',' << num(c.train_loss) << ',' << to_string(c.status) << '\n';
            }
}

std::string sweep_to_csv(const SweepResult& result) {
    std::ostringstream out;
    emit_csv(result, out);
    return out.str();
}

CsvSweep parse_sweep_csv(const std::string& text) {
    CsvSweep parsed;
    std::istringstream in(text);
    std::string line;
    bool header_seen = false;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        if (!header_seen) {
            header_seen = true;  // column header
            continue;
        }
        std::vector<std::string> fields;
        std::string field;
        std::istringstream ls(line);
        while (std::getline(ls, field, ',')) fields.push_back(field);
        while (fields.size() < 7) fields.emplace_back();
        CsvSweep::Row row;
        parsed.axis = fields[0];
        row.axis_value = std::stoi(fields[1]);
        row.optimizer = fields[2];
        row.trial = std::stoi(fields[3]);
        row.gen_loss = fields[4].empty() ? std::numeric_limits<double>::quiet_NaN()
                                         : std::stod(fields[4]);
        row.train_loss = fields[5].empty() ? std::numeric_limits<double>::quiet_NaN()
                                           : std::stod(fields[5]);
        row.status = fields[6];
        parsed.rows.push_back(std::move(row));
    }
    return parsed;
}

std::vector<AggregateRow> CsvSweep::aggregates() const {
    std::vector<int> axis_values;
    std::vector<OptimizerKind> optimizers;
    for (const auto& row : rows) {
        if (std::find(axis_values.begin(), axis_values.end(), row.axis_value) ==
            axis_values.end())
            axis_values.push_back(row.axis_value);
        const OptimizerKind opt = optimizer_from_string(row.optimizer);
        if (std::find(optimizers.begin(), optimizers.end(), opt) == optimizers.end())
            optimizers.push_back(opt);
    }
    std::sort(axis_values.begin(), axis_values.end());
    return aggregate_rows(axis_values, optimizers,
                          [this](int axis_value, OptimizerKind opt, int& undefined) {
                              std::vector<double> losses;
                              for (const auto& row : rows) {
                                  if (row.axis_value != axis_value ||
                                      optimizer_from_string(row.optimizer) != opt)
                                      continue;
                                  if (row.status == "ok" && std::isfinite(row.gen_loss))
                                      losses.push_back(row.gen_loss);
                                  else
                                      ++undefined;
                              }
                              return losses;
                          });
}

double quantile_type7(std::vector<double> values, double p) {
    if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * p;
    const std::size_t lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
}

namespace {
std::vector<double> ranks_of(const std::vector<double>& v) {
    const std::size_t n = v.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return v[a] < v[b];
    });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
        const double avg = 0.5 * (static_cast<double>(i) + static_cast<double>(j)) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
        i = j + 1;
    }
    return ranks;
}
}  // namespace

double spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
    if (x.size() != y.size() || x.size() < 2)
        throw std::invalid_argument("spearman needs two equal-length series");
    const std::vector<double> rx = ranks_of(x);
    const std::vector<double> ry = ranks_of(y);
    const double n = static_cast<double>(x.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += rx[i];
        my += ry[i];
    }
    mx /= n;
    my /= n;
    double cov = 0, vx = 0, vy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        cov += (rx[i] - mx) * (ry[i] - my);
        vx += (rx[i] - mx) * (rx[i] - mx);
        vy += (ry[i] - my) * (ry[i] - my);
    }
    if (vx == 0 || vy == 0) return 0.0;
    return cov / std::sqrt(vx * vy);
}

}  // namespace mflab
