#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "mmot/costs.hpp"

namespace mmot::detail {

class CostImpl {
 public:
  CostImpl(CostKind kind, Smoothness smooth, std::vector<int> dims, std::vector<Space> domains)
      : kind_(kind), smooth_(smooth), dims_(std::move(dims)), domains_(std::move(domains)) {}
  virtual ~CostImpl() = default;

  CostKind kind() const { return kind_; }
  Smoothness smoothness() const { return smooth_; }
  int arity() const { return static_cast<int>(dims_.size()); }
  const std::vector<int>& dims() const { return dims_; }
  const std::vector<Space>& domains() const { return domains_; }

  virtual double eval(const Tuple& x) const = 0;
  virtual std::optional<Vec> analytic_grad(const Tuple& /*x*/, int /*block*/) const {
    return std::nullopt;
  }
  virtual std::optional<Mat> analytic_mixed_hessian(const Tuple& /*x*/, int /*bi*/,
                                                    int /*bj*/) const {
    return std::nullopt;
  }

  void check_tuple(const Tuple& x) const;

 private:
  CostKind kind_;
  Smoothness smooth_;
  std::vector<int> dims_;
  std::vector<Space> domains_;
};

// Infimal-convolution evaluator; exposed internally so grad_block, argmin_y
// and the projection checks can reach the minimizer machinery.
class InfimalImpl : public CostImpl {
 public:
  InfimalImpl(std::vector<CostFunction> parts, BlockPartition partition, YDomain y,
              CostKind kind);

  double eval(const Tuple& x) const override;

  struct Minimized {
    double value = 0.0;
    std::vector<ArgminCluster> clusters;
  };
  Minimized minimize(const Tuple& x) const;

  // sum_j c_j(X_j, y) for a fixed y candidate.
  double inner_sum(const Tuple& x, const Vec& y) const;
  // D_y sum_j c_j(X_j, y).
  Vec inner_y_gradient(const Tuple& x, const Vec& y) const;
  // Envelope gradient of the original coordinate block at a fixed minimizer.
  Vec envelope_grad(const Tuple& x, int block, const Vec& y) const;

  const BlockPartition& partition() const { return partition_; }
  const std::vector<CostFunction>& parts() const { return parts_; }
  const YDomain& y_domain() const { return y_; }
  bool is_interior(const Vec& y) const;

 private:
  Tuple part_tuple(const Tuple& x, int j, const Vec& y) const;

  std::vector<CostFunction> parts_;
  BlockPartition partition_;
  YDomain y_;
};

// Default unit boxes when a constructor was not given explicit domains.
std::vector<Space> default_domains(const std::vector<int>& dims, const std::optional<Space>& box);

}  // namespace mmot::detail
