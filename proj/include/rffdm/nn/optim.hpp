#pragma once

#include <map>
#include <memory>
#include <string>

#include "rffdm/nn/graph.hpp"

namespace rffdm::nn {

/// First-order update rule applied to every parameter in a store using its accumulated grad.
class Optimizer {
 public:
  virtual ~Optimizer() = default;
  virtual void step(ParamStore& params, double learning_rate) = 0;
};

/// Adam with the infinity norm in place of the second moment.
class Adamax final : public Optimizer {
 public:
  explicit Adamax(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParamStore& params, double learning_rate) override;

 private:
  struct Slot {
    Mat m, u;
  };
  double beta1_, beta2_, eps_;
  long steps_ = 0;
  std::map<std::string, Slot> slots_;
};

class Adam final : public Optimizer {
 public:
  explicit Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : beta1_(beta1), beta2_(beta2), eps_(eps) {}
  void step(ParamStore& params, double learning_rate) override;

 private:
  struct Slot {
    Mat m, v;
  };
  double beta1_, beta2_, eps_;
  long steps_ = 0;
  std::map<std::string, Slot> slots_;
};

/// "adamax" or "adam".
std::unique_ptr<Optimizer> make_optimizer(const std::string& id);

}  // namespace rffdm::nn
