#pragma once

#include <json.hpp>

#include "mmot/costs.hpp"
#include "mmot/measures.hpp"
#include "mmot/monotonicity.hpp"
#include "mmot/solver.hpp"
#include "mmot/twistcheck.hpp"

namespace mmot {

using json = nlohmann::json;

// Measures: { "dim", "lower", "upper", "atoms", "weights" }; the random spec
// { "dim", "lower", "upper", "n", "seed" } is accepted wherever a measure is.
json measure_to_json(const DiscreteMeasure& measure);
DiscreteMeasure measure_from_json(const json& spec);

json system_to_json(const MarginalSystem& system);
// Accepts an array of measure specs or { "random_aligned": {...} }.
MarginalSystem system_from_json(const json& spec);

// Cost spec: { "kind", "m", "d", "params", "y_domain" }.
CostFunction cost_from_json(const json& spec);
YDomain y_domain_from_json(const json& spec);

json solve_report_json(const SolveReport& report);
json entropic_report_json(const EntropicReport& report);
json coupling_json(const Coupling& coupling);
json monotonicity_report_json(const MonotonicityReport& report);
json splitting_check_json(const SplittingCheck& check);
json twist_report_json(const TwistReport& report);
json graph_report_json(const GraphReport& report);
json uniqueness_report_json(const UniquenessReport& report);
json tensor_report_json(const TensorReport& report);
json tensor_scan_json(const TensorScan& scan);
json y_section_json(const YSectionSample& sample);
json criticality_json(const CriticalityReport& report);

}  // namespace mmot
