#pragma once

#include <cmath>
#include <map>
#include <string>

#include "ecgcl/model.hpp"

namespace ecgcl {

/// Adam with bias correction. Parameters reported as not trainable are
/// skipped entirely, so a frozen head is never touched.
template <typename T>
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(ModelBundle<T>& model) {
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    const T step_size = static_cast<T>(lr_ / c1);
    const T inv_c2 = static_cast<T>(1.0 / c2);
    const T b1 = static_cast<T>(beta1_), b2 = static_cast<T>(beta2_), eps = static_cast<T>(eps_);
    model.for_each_parameter([&](const std::string& name, Parameter<T>& p, bool trainable) {
      if (!trainable) return;
      auto [it, fresh] = slots_.try_emplace(name);
      Slot& s = it->second;
      if (fresh) {
        s.m = Mat<T>::Zero(p.value.rows(), p.value.cols());
        s.v = Mat<T>::Zero(p.value.rows(), p.value.cols());
      }
      s.m = b1 * s.m + (1 - b1) * p.grad;
      s.v = b2 * s.v + (1 - b2) * p.grad.cwiseAbs2();
      p.value.array() -= step_size * s.m.array() / ((s.v.array() * inv_c2).sqrt() + eps);
    });
  }

  long steps() const { return t_; }
  double learning_rate() const { return lr_; }

  /// Moments as "m.<param>" / "v.<param>" tensors.
  StateDict state() const {
    StateDict out;
    for (const auto& [name, s] : slots_) {
      out["m." + name] = s.m.template cast<float>();
      out["v." + name] = s.v.template cast<float>();
    }
    return out;
  }

  void load_state(const StateDict& state, long steps) {
    slots_.clear();
    for (const auto& [key, value] : state) {
      if (key.size() < 3 || key[1] != '.') continue;
      Slot& s = slots_[key.substr(2)];
      (key[0] == 'm' ? s.m : s.v) = value.template cast<T>();
    }
    t_ = steps;
  }

 private:
  struct Slot {
    Mat<T> m;
    Mat<T> v;
  };

  double lr_;
  double beta1_;
  double beta2_;
  double eps_;
  long t_ = 0;
  std::map<std::string, Slot> slots_;
};

}  // namespace ecgcl
