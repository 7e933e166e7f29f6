#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "mflab/descent.hpp"
#include "mflab/factorization.hpp"
#include "mflab/guess_check.hpp"
#include "mflab/problem.hpp"

namespace mflab {

enum class OptimizerKind { gnc, gd, prior };
enum class SweepAxis { width, depth };
enum class CellStatus { ok, zero_accept, diverged, skipped };

std::string to_string(OptimizerKind opt);
std::string to_string(SweepAxis axis);
std::string to_string(CellStatus status);
OptimizerKind optimizer_from_string(const std::string& s);

struct InstanceParams {
    int m = 5;
    int m_prime = 5;
    int r = 1;
    double b = 1.0;
    int n = 15;
    MeasurementKind kind = MeasurementKind::gaussian;
};

/// Which built-in hyperparameter table fills the GD configuration per axis
/// value (none: use the sweep's GdConfig as given).
enum class GdTable { none, width_setting, depth_setting, depth_rank2_setting };

/// Returns `base` with base_lr / init_scale / epochs replaced by the table
/// entry for (activation, depth).
GdConfig gd_hyperparams(GdTable table, ActivationKind activation, int depth, GdConfig base);

struct SweepConfig {
    std::string name = "custom";
    SweepAxis axis = SweepAxis::width;
    std::vector<int> axis_values;       // nonempty, strictly increasing
    FactorizationSpec spec;             // the axis field is overridden per value
    InstanceParams instance;
    std::vector<OptimizerKind> optimizers{OptimizerKind::gnc, OptimizerKind::gd,
                                          OptimizerKind::prior};
    GncConfig gnc;
    GdConfig gd;
    GdTable gd_table = GdTable::none;
    int gd_axis_cap = 0;                // skip GD cells above this axis value (0: none)
    int trials = 8;
    std::uint64_t master_seed = 0;
    int threads = 0;

    void validate() const;
};

struct SweepCell {
    double gen_loss = std::numeric_limits<double>::quiet_NaN();
    double train_loss = std::numeric_limits<double>::quiet_NaN();
    CellStatus status = CellStatus::ok;
    // G&C extras: the retained accepted distribution behind the per-trial
    // mean, so either aggregation of the paper's protocols is recomputable.
    std::uint64_t accepted_count = 0;
    std::uint64_t total_drawn = 0;
    std::vector<double> accepted_gen_losses;
};

struct AggregateRow {
    int axis_value = 0;
    OptimizerKind optimizer = OptimizerKind::gnc;
    double median = std::numeric_limits<double>::quiet_NaN();
    double q25 = std::numeric_limits<double>::quiet_NaN();
    double q75 = std::numeric_limits<double>::quiet_NaN();
    int defined_cells = 0;
    int undefined_cells = 0;
};

struct SweepResult {
    SweepConfig config;
    // cells[axis_index][optimizer_index][trial]
    std::vector<std::vector<std::vector<SweepCell>>> cells;

    const SweepCell& cell(int axis_index, OptimizerKind opt, int trial) const;
    /// Median / quartiles (type-7 interpolation) over defined trials.
    std::vector<AggregateRow> aggregates() const;
    bool any_flagged_failure() const;
};

/// Runs the full grid. Every trial regenerates its instance from
/// (master_seed, trial) so all optimizers within a trial share it; every
/// cell's randomness derives from (master_seed, axis_value, optimizer,
/// trial). Per-cell failures are recorded in the cell status, never fatal.
SweepResult run_sweep(const SweepConfig& cfg);

/// CSV: a '#'-prefixed provenance header, then
/// axis,axis_value,optimizer,trial,gen_loss,train_loss,status rows.
/// Deterministic bytes for a given result.
void emit_csv(const SweepResult& result, std::ostream& out);
std::string sweep_to_csv(const SweepResult& result);

/// Parsed-back view of a sweep CSV (for plotting and round-trip checks).
struct CsvSweep {
    std::string axis;
    struct Row {
        int axis_value;
        std::string optimizer;
        int trial;
        double gen_loss;  // NaN when undefined
        double train_loss;
        std::string status;
    };
    std::vector<Row> rows;
    std::vector<AggregateRow> aggregates() const;
};
CsvSweep parse_sweep_csv(const std::string& text);

/// SVG plot: log-scale y, median markers with interquartile error bars,
/// one series per optimizer; all-undefined series are dropped with a
/// legend note.
void emit_plot(const SweepResult& result, std::ostream& out);
void emit_plot_from_csv(const std::string& csv_text, std::ostream& out);

/// Built-in experiment presets keyed by figure and activation, plus a
/// desk-scale reduction for quick runs.
std::vector<std::string> preset_names();
SweepConfig load_preset(const std::string& name);
SweepConfig desk_scale(SweepConfig cfg);

/// Type-7 quantile (linear interpolation between order statistics).
double quantile_type7(std::vector<double> values, double p);

/// Spearman rank correlation (average ranks on ties).
double spearman_rho(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace mflab
