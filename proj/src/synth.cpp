#include "dualscope/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>

#include "rng.hpp"

namespace dualscope {
namespace {

using detail::standard_normal;
using detail::uniform;
using detail::uniform_int;
double uniform(std::mt19937_64& rng) { return detail::uniform01(rng); }

std::mt19937_64 record_rng(std::uint64_t seed, std::uint64_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32), 0x5eedu};
  return std::mt19937_64(seq);
}

constexpr double kBackground = 0.08;
constexpr double kTissue = 0.45;

struct Canvas {
  std::size_t size;
  std::vector<double> px;
  // lobe outline
  double cx, cy, ax, ay;

  double at(std::size_t y, std::size_t x) const { return px[y * size + x]; }
  double& at(std::size_t y, std::size_t x) { return px[y * size + x]; }

  // Normalised elliptical radius of a pixel centre; < 1 inside the lobe.
  double lobe_radius(double y, double x) const {
    const double dx = (x - cx) / ax;
    const double dy = (y - cy) / ay;
    return std::sqrt(dx * dx + dy * dy);
  }
  bool inside(std::size_t y, std::size_t x) const {
    return lobe_radius(static_cast<double>(y) + 0.5, static_cast<double>(x) + 0.5) < 1.0;
  }

  // Random point well inside the lobe: within `frac` of the outline.
  std::pair<double, double> interior_point(std::mt19937_64& rng, double frac) const {
    const double r = frac * std::sqrt(uniform(rng));
    const double t = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    return {cy + r * ay * std::sin(t), cx + r * ax * std::cos(t)};
  }

  void disc(double y0, double x0, double radius, double value) {
    for (std::size_t y = 0; y < size; ++y) {
      for (std::size_t x = 0; x < size; ++x) {
        const double dy = static_cast<double>(y) + 0.5 - y0;
        const double dx = static_cast<double>(x) + 0.5 - x0;
        if (dx * dx + dy * dy <= radius * radius && inside(y, x)) at(y, x) = value;
      }
    }
  }
};

Canvas blank_lobe(std::size_t s, std::mt19937_64& rng) {
  const double S = static_cast<double>(s);
  Canvas c{s, std::vector<double>(s * s, kBackground), 0, 0, 0, 0};
  c.cx = S * (0.5 + uniform(rng, -0.04, 0.04));
  c.cy = S * (0.5 + uniform(rng, -0.04, 0.04));
  c.ax = S * uniform(rng, 0.34, 0.40);
  c.ay = S * uniform(rng, 0.42, 0.47);
  for (std::size_t y = 0; y < s; ++y) {
    for (std::size_t x = 0; x < s; ++x) {
      if (c.inside(y, x)) c.at(y, x) = kTissue;
    }
  }
  return c;
}

void draw_normal(Canvas& c, std::mt19937_64& rng) {
  const double t = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double gy = std::sin(t) * 0.1;
  const double gx = std::cos(t) * 0.1;
  for (std::size_t y = 0; y < c.size; ++y) {
    for (std::size_t x = 0; x < c.size; ++x) {
      if (!c.inside(y, x)) continue;
      const double dy = (static_cast<double>(y) + 0.5 - c.cy) / c.ay;
      const double dx = (static_cast<double>(x) + 0.5 - c.cx) / c.ax;
      c.at(y, x) = kTissue + gy * dy + gx * dx;
    }
  }
}

void draw_thyroiditis(Canvas& c, std::mt19937_64& rng) {
  for (std::size_t y = 0; y < c.size; ++y) {
    for (std::size_t x = 0; x < c.size; ++x) {
      if (!c.inside(y, x)) continue;
      if (uniform(rng) < 0.35) c.at(y, x) = kTissue + (uniform(rng) < 0.5 ? -0.3 : 0.3);
    }
  }
}

void draw_cystic(Canvas& c, std::mt19937_64& rng) {
  const double S = static_cast<double>(c.size);
  const std::size_t n = uniform_int(rng, 1, 2);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [y, x] = c.interior_point(rng, 0.45);
    c.disc(y, x, S * uniform(rng, 0.16, 0.24), 0.12);
  }
}

void draw_goiter(Canvas& c, std::mt19937_64& rng) {
  const double S = static_cast<double>(c.size);
  const std::size_t n = uniform_int(rng, 7, 11);
  for (std::size_t i = 0; i < n; ++i) {
    const auto [y, x] = c.interior_point(rng, 0.85);
    c.disc(y, x, S * uniform(rng, 0.05, 0.09), 0.75);
  }
}

void draw_adenoma(Canvas& c, std::mt19937_64& rng) {
  const double S = static_cast<double>(c.size);
  const auto [y, x] = c.interior_point(rng, 0.4);
  c.disc(y, x, S * uniform(rng, 0.14, 0.20), 0.95);
}

void draw_cancer(Canvas& c, std::mt19937_64& rng) {
  const double S = static_cast<double>(c.size);
  const auto [y0, x0] = c.interior_point(rng, 0.35);
  const double r0 = S * uniform(rng, 0.17, 0.23);
  const double p1 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  const double p2 = uniform(rng, 0.0, 2.0 * std::numbers::pi);
  for (std::size_t y = 0; y < c.size; ++y) {
    for (std::size_t x = 0; x < c.size; ++x) {
      if (!c.inside(y, x)) continue;
      const double dy = static_cast<double>(y) + 0.5 - y0;
      const double dx = static_cast<double>(x) + 0.5 - x0;
      const double t = std::atan2(dy, dx);
      const double boundary = r0 * (1.0 + 0.3 * std::sin(3.0 * t + p1) + 0.2 * std::sin(5.0 * t + p2));
      if (std::sqrt(dx * dx + dy * dy) <= boundary) c.at(y, x) = uniform(rng) < 0.5 ? 0.1 : 0.95;
    }
  }
}

}  // namespace

void SyntheticSpec::validate() const {
  if (image_size == 0) throw std::invalid_argument("synthetic image size must be positive");
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) {
    throw std::invalid_argument("noise sigma must be a finite value >= 0");
  }
  if (female_count && *female_count > total()) {
    throw std::invalid_argument("female_count " + std::to_string(*female_count) + " exceeds the " +
                                std::to_string(total()) + " records");
  }
}

std::size_t SyntheticSpec::total() const noexcept {
  std::size_t n = 0;
  for (const std::size_t c : per_gland) n += c;
  for (const auto& p : pairs) n += p.count;
  return n;
}

SyntheticSpec SyntheticSpec::balanced16(std::size_t per_class, std::size_t image_size, double noise_sigma,
                                        std::uint64_t seed) {
  SyntheticSpec s;
  s.per_gland.fill(per_class);
  s.image_size = image_size;
  s.noise_sigma = noise_sigma;
  s.seed = seed;
  return s;
}

SyntheticSpec SyntheticSpec::paper_shaped(std::size_t image_size, double noise_sigma, std::uint64_t seed) {
  using L = LobeClass;
  SyntheticSpec s;
  s.image_size = image_size;
  s.noise_sigma = noise_sigma;
  s.seed = seed;
  // Same class on both sides where the per-lobe counts allow it; the
  // remaining left adenoma/cancer lobes pair with the right-side surplus.
  s.pairs = {
      {L::Normal, L::Normal, 199},   {L::Thyroiditis, L::Thyroiditis, 68}, {L::Cystic, L::Cystic, 299},
      {L::Goiter, L::Goiter, 178},   {L::Adenoma, L::Adenoma, 47},         {L::Cancer, L::Cancer, 154},
      {L::Cancer, L::Normal, 18},    {L::Cancer, L::Thyroiditis, 4},       {L::Cancer, L::Cystic, 2},
      {L::Adenoma, L::Cystic, 7},    {L::Adenoma, L::Goiter, 1},
  };
  s.female_count = 774;
  return s;
}

Tensor4 render_lobe(LobeClass c, std::size_t image_size, double noise_sigma, std::mt19937_64& rng) {
  Canvas canvas = blank_lobe(image_size, rng);
  switch (c) {
    case LobeClass::Normal: draw_normal(canvas, rng); break;
    case LobeClass::Thyroiditis: draw_thyroiditis(canvas, rng); break;
    case LobeClass::Cystic: draw_cystic(canvas, rng); break;
    case LobeClass::Goiter: draw_goiter(canvas, rng); break;
    case LobeClass::Adenoma: draw_adenoma(canvas, rng); break;
    case LobeClass::Cancer: draw_cancer(canvas, rng); break;
  }
  Tensor4 img(Shape4{1, image_size, image_size, 1});
  for (std::size_t i = 0; i < canvas.px.size(); ++i) {
    const double v = canvas.px[i] + (noise_sigma > 0.0 ? noise_sigma * standard_normal(rng) : 0.0);
    img[i] = static_cast<float>(std::clamp(v, 0.0, 1.0));
  }
  return img;
}

std::vector<LobeSample> synth_generate(const SyntheticSpec& spec) {
  spec.validate();
  std::vector<std::pair<LobeClass, LobeClass>> plan;
  plan.reserve(spec.total());
  for (std::size_t g = 0; g < kGlandClassCount; ++g) {
    const auto [a, b] = lobe_pair(gland_class_from_code(g));
    for (std::size_t i = 0; i < spec.per_gland[g]; ++i) plan.emplace_back(i % 2 == 0 ? a : b, i % 2 == 0 ? b : a);
  }
  for (const auto& p : spec.pairs) {
    for (std::size_t i = 0; i < p.count; ++i) plan.emplace_back(p.left, p.right);
  }

  std::vector<Gender> genders(plan.size(), Gender::Female);
  std::mt19937_64 demo_rng(detail::splitmix64(spec.seed ^ 0x67656e646572ULL));
  if (spec.female_count) {
    std::fill(genders.begin() + static_cast<std::ptrdiff_t>(*spec.female_count), genders.end(), Gender::Male);
    detail::shuffle(genders.begin(), genders.end(), demo_rng);
  } else {
    for (auto& g : genders) g = uniform(demo_rng) < 0.5 ? Gender::Female : Gender::Male;
  }

  std::vector<LobeSample> out;
  out.reserve(plan.size());
  for (std::size_t i = 0; i < plan.size(); ++i) {
    std::mt19937_64 rng = record_rng(spec.seed, i);
    const auto age = static_cast<AgeGroup>(uniform_int(rng, 0, 4));
    Tensor4 left = render_lobe(plan[i].first, spec.image_size, spec.noise_sigma, rng);
    Tensor4 right = render_lobe(plan[i].second, spec.image_size, spec.noise_sigma, rng);
    std::string id = std::to_string(i);
    id = "S" + std::string(id.size() < 5 ? 5 - id.size() : 0, '0') + id;
    out.push_back(LobeSample::make(id, std::move(left), std::move(right), plan[i].first, plan[i].second, genders[i], age));
  }
  return out;
}

}  // namespace dualscope
