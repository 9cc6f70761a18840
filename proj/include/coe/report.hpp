// Writers for run artifacts: metrics.json, metrics.csv, txs.csv, verdicts.json.
#pragma once

#include "coe/harness.hpp"

#include <filesystem>
#include <ostream>

namespace coe {

/// One row per measurement: name,seed,executor,metric,value.
void write_metrics_csv(std::ostream& out, MetricsReport const& m, bool header = true);
void write_txs_csv(std::ostream& out, std::map<TxId, TxMetric> const& txs);

/// Writes all artifacts of a run into `dir` (created if missing).
void write_report(std::filesystem::path const& dir, RunResult const& r);

} // namespace coe
