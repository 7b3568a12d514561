#include "mmot/io_json.hpp"

#include <stdexcept>

namespace mmot {

namespace {

json vec_json(const Vec& v) {
  json out = json::array();
  for (int k = 0; k < v.size(); ++k) out.push_back(v[k]);
  return out;
}

Vec vec_from(const json& j) {
  Vec v(j.size());
  for (std::size_t k = 0; k < j.size(); ++k) v[static_cast<int>(k)] = j[k].get<double>();
  return v;
}

json mat_json(const Mat& m) {
  json out = json::array();
  for (int r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (int c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(row);
  }
  return out;
}

json tuple_json(const Tuple& x) {
  json out = json::array();
  for (const Vec& v : x) out.push_back(vec_json(v));
  return out;
}

// Bounds may be given as a scalar (applied to every coordinate) or an array.
Vec bound_from(const json& j, int dim) {
  if (j.is_number()) return Vec::Constant(dim, j.get<double>());
  if (static_cast<int>(j.size()) != dim) {
    throw std::invalid_argument("json: bound array length does not match dim");
  }
  return vec_from(j);
}

}  // namespace

json measure_to_json(const DiscreteMeasure& measure) {
  json out;
  out["dim"] = measure.space().dim;
  out["lower"] = vec_json(measure.space().lower);
  out["upper"] = vec_json(measure.space().upper);
  json atoms = json::array();
  for (const Vec& a : measure.atoms()) atoms.push_back(vec_json(a));
  out["atoms"] = std::move(atoms);
  out["weights"] = measure.weights();
  return out;
}

DiscreteMeasure measure_from_json(const json& spec) {
  const int dim = spec.at("dim").get<int>();
  const Space space = Space::box(bound_from(spec.at("lower"), dim),
                                 bound_from(spec.at("upper"), dim));
  if (spec.contains("n") && spec.contains("seed")) {
    return random_generic_measure(space, spec.at("n").get<int>(),
                                  spec.at("seed").get<std::uint64_t>());
  }
  std::vector<Vec> atoms;
  for (const json& a : spec.at("atoms")) {
    atoms.push_back(a.is_number() ? Vec::Constant(1, a.get<double>()) : vec_from(a));
  }
  std::vector<double> weights = spec.at("weights").get<std::vector<double>>();
  return new_discrete_measure(space, std::move(atoms), std::move(weights));
}

json system_to_json(const MarginalSystem& system) {
  json out = json::array();
  for (const DiscreteMeasure& mu : system.marginals()) out.push_back(measure_to_json(mu));
  return out;
}

MarginalSystem system_from_json(const json& spec) {
  if (spec.is_object() && spec.contains("random_aligned")) {
    const json& r = spec.at("random_aligned");
    const int dim = r.value("dim", 1);
    const Space space = Space::box(bound_from(r.value("lower", json(0.0)), dim),
                                   bound_from(r.value("upper", json(1.0)), dim));
    return random_aligned_system(space, r.at("m").get<int>(), r.at("n").get<int>(),
                                 r.at("seed").get<std::uint64_t>());
  }
  if (!spec.is_array()) {
    throw std::invalid_argument("marginals: expected an array or {\"random_aligned\": ...}");
  }
  std::vector<DiscreteMeasure> measures;
  for (const json& m : spec) {
    measures.push_back(measure_from_json(m.contains("random") ? m.at("random") : m));
  }
  return MarginalSystem(std::move(measures));
}

YDomain y_domain_from_json(const json& spec) {
  const json& lo = spec.at("lower");
  const int dim = lo.is_number() ? spec.value("dim", 1) : static_cast<int>(lo.size());
  const Space space =
      Space::box(bound_from(lo, dim), bound_from(spec.at("upper"), dim), "Y");
  std::vector<int> counts;
  if (spec.at("counts").is_number()) {
    counts.assign(dim, spec.at("counts").get<int>());
  } else {
    counts = spec.at("counts").get<std::vector<int>>();
  }
  return YDomain::lattice(space, counts);
}

namespace {

// A quadratic block part sum_i |x_i - y|^2 over the coordinates of one
// partition block, with y as the final argument.
CostFunction quadratic_block_part(int block_size, int d, const Space& box, const Space& ybox) {
  if (block_size == 1) return quadratic_pair_cost(d, box, ybox);
  CustomCost spec;
  spec.block_dims.assign(block_size + 1, d);
  spec.domains.assign(block_size, box);
  spec.domains.push_back(ybox);
  spec.smoothness = Smoothness::everywhere_smooth;
  spec.value = [block_size](const Tuple& x) {
    double s = 0.0;
    for (int i = 0; i < block_size; ++i) s += (x[i] - x[block_size]).squaredNorm();
    return s;
  };
  spec.grad_block = [block_size](const Tuple& x, int b) {
    if (b < block_size) return Vec(2.0 * (x[b] - x[block_size]));
    Vec g = Vec::Zero(x[block_size].size());
    for (int i = 0; i < block_size; ++i) g += 2.0 * (x[block_size] - x[i]);
    return g;
  };
  return custom_cost(std::move(spec));
}

}  // namespace

CostFunction cost_from_json(const json& spec) {
  const std::string kind = spec.at("kind").get<std::string>();
  const json params = spec.value("params", json::object());
  std::optional<Space> box;
  if (spec.contains("lower") && spec.contains("upper")) {
    const int d = spec.at("d").is_number() ? spec.at("d").get<int>()
                                           : spec.at("d")[0].get<int>();
    box = Space::box(bound_from(spec.at("lower"), d), bound_from(spec.at("upper"), d));
  }
  auto scalar_d = [&] {
    const json& d = spec.at("d");
    return d.is_number() ? d.get<int>() : d[0].get<int>();
  };

  if (kind == "gangbo_swiech") {
    return gangbo_swiech(spec.at("m").get<int>(), scalar_d(), box);
  }
  if (kind == "heinich") {
    const std::string h = params.value("h", "neg_square");
    if (h != "neg_square") {
      throw std::invalid_argument("cost_from_json: unknown heinich h: " + h);
    }
    return heinich(spec.at("m").get<int>(), scalar_d(), neg_squared_norm(), box);
  }
  if (kind == "chain_bilinear") {
    const std::string g = params.value("g", "zero");
    const int d = scalar_d();
    if (g == "zero") return chain_bilinear(zero_two_block(d), d, box);
    if (g == "dot") return chain_bilinear(dot_two_block(d), d, box);
    throw std::invalid_argument("cost_from_json: unknown chain_bilinear g: " + g);
  }
  if (kind == "matching" || kind == "infimal_convolution") {
    const std::string parts = params.value("parts", "quadratic");
    if (parts != "quadratic") {
      throw std::invalid_argument("cost_from_json: unknown parts family: " + parts);
    }
    const int m = spec.at("m").get<int>();
    const int d = scalar_d();
    YDomain y = y_domain_from_json(spec.at("y_domain"));
    const Space block_box = box ? *box : Space::box(d, 0.0, 1.0);
    BlockPartition partition = kind == "matching"
                                   ? BlockPartition::singletons(m)
                                   : BlockPartition::of(
                                         params.at("boundaries").get<std::vector<int>>());
    partition.validate(m);
    std::vector<CostFunction> part_costs;
    for (int j = 0; j < partition.blocks(); ++j) {
      part_costs.push_back(quadratic_block_part(partition.size(j), d, block_box, y.space));
    }
    if (kind == "matching") return matching_cost(std::move(part_costs), std::move(y));
    return infimal_convolution(std::move(part_costs), std::move(partition), std::move(y));
  }
  if (kind == "tabulated") {
    std::vector<std::vector<double>> axes;
    if (params.contains("axes")) {
      axes = params.at("axes").get<std::vector<std::vector<double>>>();
    } else {
      const auto shape = params.at("shape").get<std::vector<int>>();
      const auto lower = params.at("lower").get<std::vector<double>>();
      const auto upper = params.at("upper").get<std::vector<double>>();
      if (lower.size() != shape.size() || upper.size() != shape.size()) {
        throw std::invalid_argument("cost_from_json: tabulated bound arity mismatch");
      }
      for (std::size_t i = 0; i < shape.size(); ++i) {
        std::vector<double> ax(shape[i]);
        for (int k = 0; k < shape[i]; ++k) {
          ax[k] = shape[i] > 1
                      ? lower[i] + (upper[i] - lower[i]) * k / (shape[i] - 1)
                      : 0.5 * (lower[i] + upper[i]);
        }
        axes.push_back(std::move(ax));
      }
    }
    if (params.contains("file")) {
      return tabulated_cost_from_file(params.at("file").get<std::string>(), std::move(axes));
    }
    return tabulated_cost(std::move(axes), params.at("values").get<std::vector<double>>());
  }
  throw std::invalid_argument("cost_from_json: unknown kind: " + kind);
}

// --- reports ---------------------------------------------------------------

json coupling_json(const Coupling& coupling) {
  json entries = json::array();
  for (const CouplingEntry& e : coupling.entries()) {
    entries.push_back({{"index", e.index}, {"mass", e.mass}});
  }
  return {{"entries", std::move(entries)},
          {"max_marginal_residual", coupling.max_marginal_residual()}};
}

json solve_report_json(const SolveReport& report) {
  json potentials = json::array();
  for (const Vec& u : report.potentials.u) potentials.push_back(vec_json(u));
  return {{"primal", report.primal},
          {"dual", report.dual},
          {"gap", report.gap},
          {"iterations", report.iterations},
          {"degenerate", report.degenerate},
          {"support_size", report.coupling.entries().size()},
          {"coupling", coupling_json(report.coupling)},
          {"potentials", std::move(potentials)},
          {"normalization_anchor", report.potentials.anchor}};
}

json entropic_report_json(const EntropicReport& report) {
  return {{"converged", report.converged},
          {"sweeps", report.sweeps},
          {"max_marginal_l1", report.max_marginal_l1},
          {"objective", report.objective},
          {"support_size", report.coupling.entries().size()}};
}

json monotonicity_report_json(const MonotonicityReport& report) {
  json out{{"monotone", report.monotone},
           {"max_subset_checked", report.max_subset_checked},
           {"work", report.work},
           {"budget_exhausted", report.budget_exhausted}};
  if (report.violation) {
    const PermutationWitness& w = *report.violation;
    out["violation"] = {{"subset", w.subset},
                        {"permutations", w.permutations},
                        {"base_sum", w.base_sum},
                        {"permuted_sum", w.permuted_sum},
                        {"deficit", w.deficit}};
  }
  return out;
}

json splitting_check_json(const SplittingCheck& check) {
  return {{"certified", check.certified},
          {"max_equality_residual", check.max_equality_residual},
          {"max_feasibility_violation", check.max_feasibility_violation}};
}

json twist_report_json(const TwistReport& report) {
  json collisions = json::array();
  for (const TwistCollision& c : report.collisions) {
    collisions.push_back({{"x1_index", c.x1_index},
                          {"partner_a", c.partner_a},
                          {"partner_b", c.partner_b},
                          {"gradient_distance", c.gradient_distance},
                          {"partner_distance", c.partner_distance}});
  }
  return {{"sections_audited", report.sections_audited},
          {"pairs_compared", report.pairs_compared},
          {"nondifferentiable_excluded", report.nondifferentiable_excluded},
          {"collisions", std::move(collisions)},
          {"pass", report.pass},
          {"caveat", "evidence on the audited support only, not a proof of the condition"}};
}

json graph_report_json(const GraphReport& report) {
  json out{{"is_graph", report.is_graph}, {"multivalued_x1_atoms", report.multivalued}};
  if (report.is_graph) out["map"] = report.map;
  return out;
}

json uniqueness_report_json(const UniquenessReport& report) {
  const char* verdict = report.verdict == Uniqueness::unique
                            ? "unique"
                            : report.verdict == Uniqueness::non_unique ? "non_unique"
                                                                       : "inconclusive";
  json out{{"verdict", verdict},
           {"trials", report.trials},
           {"support_matches", report.support_matches}};
  if (!report.witnesses.empty()) {
    json w = json::array();
    for (const Coupling& c : report.witnesses) w.push_back(coupling_json(c));
    out["witnesses"] = std::move(w);
  }
  return out;
}

json tensor_report_json(const TensorReport& report) {
  json anchors = json::array();
  for (const Tuple& a : report.anchors) anchors.push_back(tuple_json(a));
  Vec neg = -report.eigenvalues_T;
  std::sort(neg.data(), neg.data() + neg.size());
  return {{"base", tuple_json(report.base)},
          {"anchors", std::move(anchors)},
          {"S", mat_json(report.S)},
          {"H", mat_json(report.H)},
          {"T", mat_json(report.T)},
          {"pre_symmetrization_asymmetry", report.pre_symmetrization_asymmetry},
          {"eigenvalues_T", vec_json(report.eigenvalues_T)},
          {"eigenvalues_negT", vec_json(neg)},
          {"negative_definite", report.negative_definite}};
}

json tensor_scan_json(const TensorScan& scan) {
  json reports = json::array();
  for (const TensorReport& r : scan.reports) reports.push_back(tensor_report_json(r));
  return {{"samples", scan.reports.size()},
          {"skipped_singular", scan.skipped_singular},
          {"negative_on_samples", scan.negative_on_samples},
          {"max_eigenvalue_T", scan.max_eigenvalue},
          {"min_eigenvalue_T", scan.min_eigenvalue},
          {"caveat", "no violation found in the sampled points; not a proof"},
          {"reports", std::move(reports)}};
}

json y_section_json(const YSectionSample& sample) {
  json pts = json::array();
  for (const YSectionPoint& p : sample.samples) {
    json mids = json::array();
    for (const Vec& v : p.middles) mids.push_back(vec_json(v));
    pts.push_back({{"middles", std::move(mids)},
                   {"xm", vec_json(p.xm)},
                   {"residual", p.residual}});
  }
  return {{"x1", vec_json(sample.x1)},
          {"p1", vec_json(sample.p1)},
          {"attempted", sample.attempted},
          {"samples", std::move(pts)}};
}

json criticality_json(const CriticalityReport& report) {
  return {{"max_interior_gradient_norm", report.max_interior_gradient_norm},
          {"interior_minimizers", report.interior_minimizers},
          {"boundary_minimizers", report.boundary_minimizers},
          {"pass", report.pass}};
}

}  // namespace mmot
