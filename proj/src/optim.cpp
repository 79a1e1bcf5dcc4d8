#include "dualscope/optim.hpp"

#include <cmath>
#include <stdexcept>

namespace dualscope {

template <typename T>
void adam_step(Parameter<T>& param, double lr, const AdamConfig& config) {
  const std::uint64_t t = ++param.step_count;
  const double b1 = config.beta1;
  const double b2 = config.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t));
  auto value = param.value.data();
  const auto grad = param.gradient.data();
  auto m = param.adam_m.data();
  auto v = param.adam_v.data();
  for (std::size_t i = 0; i < value.size(); ++i) {
    const double g = static_cast<double>(grad[i]);
    const double mi = b1 * static_cast<double>(m[i]) + (1.0 - b1) * g;
    const double vi = b2 * static_cast<double>(v[i]) + (1.0 - b2) * g * g;
    m[i] = static_cast<T>(mi);
    v[i] = static_cast<T>(vi);
    const double m_hat = mi / correction1;
    const double v_hat = vi / correction2;
    value[i] = static_cast<T>(static_cast<double>(value[i]) - lr * m_hat / (std::sqrt(v_hat) + config.epsilon));
  }
}

double lr_schedule(std::size_t epoch, double warm_lr, double fixed_lr, std::size_t decay_epochs) {
  if (decay_epochs == 0) throw std::invalid_argument("lr_schedule: decay_epochs must be >= 1");
  if (!(warm_lr > 0.0) || !(fixed_lr > 0.0)) throw std::invalid_argument("lr_schedule: rates must be positive");
  if (epoch >= decay_epochs) return fixed_lr;
  const double frac = static_cast<double>(epoch) / static_cast<double>(decay_epochs);
  return warm_lr * std::pow(fixed_lr / warm_lr, frac);
}

template void adam_step(Parameter<float>&, double, const AdamConfig&);
template void adam_step(Parameter<double>&, double, const AdamConfig&);

}  // namespace dualscope
