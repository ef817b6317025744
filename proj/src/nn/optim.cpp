#include "rffdm/nn/optim.hpp"

#include <cmath>

#include "rffdm/errors.hpp"

namespace rffdm::nn {

void Adamax::step(ParamStore& params, double lr) {
  ++steps_;
  const double step_size = lr / (1.0 - std::pow(beta1_, static_cast<double>(steps_)));
  for (auto& [name, p] : params) {
    auto [it, fresh] = slots_.try_emplace(name);
    Slot& s = it->second;
    if (fresh) {
      s.m = Mat::Zero(p.value.rows(), p.value.cols());
      s.u = Mat::Zero(p.value.rows(), p.value.cols());
    }
    s.m = beta1_ * s.m + (1.0 - beta1_) * p.grad;
    s.u = (beta2_ * s.u).cwiseMax(p.grad.cwiseAbs());
    p.value.array() -= step_size * s.m.array() / (s.u.array() + eps_);
  }
}

void Adam::step(ParamStore& params, double lr) {
  ++steps_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(steps_));
  for (auto& [name, p] : params) {
    auto [it, fresh] = slots_.try_emplace(name);
    Slot& s = it->second;
    if (fresh) {
      s.m = Mat::Zero(p.value.rows(), p.value.cols());
      s.v = Mat::Zero(p.value.rows(), p.value.cols());
    }
    s.m = beta1_ * s.m + (1.0 - beta1_) * p.grad;
    s.v = beta2_ * s.v + (1.0 - beta2_) * p.grad.cwiseAbs2();
    p.value.array() -= lr * (s.m.array() / c1) / ((s.v.array() / c2).sqrt() + eps_);
  }
}

std::unique_ptr<Optimizer> make_optimizer(const std::string& id) {
  if (id == "adamax") return std::make_unique<Adamax>();
  if (id == "adam") return std::make_unique<Adam>();
  throw ConfigError("unknown optimizer '" + id + "' (expected adamax or adam)");
}

}  // namespace rffdm::nn
