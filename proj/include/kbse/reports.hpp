#pragma once

#include <string>

#include "kbse/eval.hpp"
#include "kbse/loop.hpp"

namespace kbse {

// One JSON object per line: episode records then epoch records, in order.
std::string metrics_to_jsonl(const RunMetrics& metrics);

// Final run summary (the only emitted file containing wall-clock time).
std::string summary_to_json(const RunResult& result, const RunConfig& config);

std::string eval_report_to_json(const EvalReport& report);

}  // namespace kbse
