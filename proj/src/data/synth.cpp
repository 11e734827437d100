#include "ctcig/data/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>

namespace ctcig::data {

TextureKind parse_texture_kind(const std::string& s) {
  if (s == "value_noise") return TextureKind::value_noise;
  if (s == "stripes") return TextureKind::stripes;
  if (s == "blotch") return TextureKind::blotch;
  throw ConfigError("texture_kind", "unknown texture '" + s + "'");
}

ObjectKind parse_object_kind(const std::string& s) {
  if (s == "ellipse") return ObjectKind::ellipse;
  if (s == "metaball") return ObjectKind::metaball;
  throw ConfigError("object_kind", "unknown object '" + s + "'");
}

std::string to_string(TextureKind k) {
  switch (k) {
    case TextureKind::value_noise: return "value_noise";
    case TextureKind::stripes: return "stripes";
    case TextureKind::blotch: return "blotch";
  }
  return "value_noise";
}

std::string to_string(ObjectKind k) { return k == ObjectKind::ellipse ? "ellipse" : "metaball"; }

void SynthConfig::validate() const {
  if (size != 32 && size != 64 && size != 128) throw ConfigError("size", "must be 32, 64 or 128");
  if (!(contrast_delta >= 0.0 && contrast_delta <= 0.3))
    throw ConfigError("contrast_delta", "must lie in [0, 0.3]");
}

namespace {

uint64_t mix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

/// Counter-based generator: portable, unlike the std distributions.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}
  uint64_t next() { return mix64(state_++ * 0xD1B54A32D192ED03ULL ^ 0x8CB92BA72F3D8DD7ULL); }
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int64_t below(int64_t n) { return static_cast<int64_t>(next() % static_cast<uint64_t>(n)); }

 private:
  uint64_t state_;
};

struct NamedColor {
  const char* name;
  std::array<double, 3> rgb;
};

constexpr std::array<NamedColor, 8> kPalette{{
    {"olive", {0.50, 0.50, 0.22}},
    {"sandy", {0.78, 0.68, 0.48}},
    {"mossy green", {0.35, 0.47, 0.25}},
    {"slate grey", {0.44, 0.50, 0.56}},
    {"rust brown", {0.55, 0.30, 0.18}},
    {"ochre", {0.80, 0.60, 0.20}},
    {"bark brown", {0.40, 0.30, 0.22}},
    {"lichen grey", {0.62, 0.64, 0.56}},
}};

/// Lattice value noise with hashed corners, so any real-valued offset of the
/// sampling position is well defined.
double lattice(uint64_t seed, int64_t ix, int64_t iy) {
  const uint64_t h = mix64(seed ^ mix64(static_cast<uint64_t>(ix) * 0x9E3779B1ULL +
                                        static_cast<uint64_t>(iy) * 0x85EBCA77ULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double value_noise(uint64_t seed, double x, double y, double cell) {
  const double fx = x / cell, fy = y / cell;
  const auto ix = static_cast<int64_t>(std::floor(fx)), iy = static_cast<int64_t>(std::floor(fy));
  const double tx = smooth(fx - static_cast<double>(ix)), ty = smooth(fy - static_cast<double>(iy));
  const double a = lattice(seed, ix, iy), b = lattice(seed, ix + 1, iy);
  const double c = lattice(seed, ix, iy + 1), d = lattice(seed, ix + 1, iy + 1);
  return (a + (b - a) * tx) * (1.0 - ty) + (c + (d - c) * tx) * ty;
}

struct TextureParams {
  uint64_t seed;
  double cell;
  double angle;
  double period;
};

/// Texture intensity in [0,1] at a real-valued position.
double texture_at(TextureKind kind, const TextureParams& p, double x, double y) {
  switch (kind) {
    case TextureKind::value_noise:
      return 0.65 * value_noise(p.seed, x, y, p.cell) + 0.35 * value_noise(p.seed + 1, x, y, p.cell / 2.0);
    case TextureKind::stripes: {
      const double u = x * std::cos(p.angle) + y * std::sin(p.angle);
      const double wobble = 2.0 * value_noise(p.seed + 2, x, y, p.cell);
      return 0.5 + 0.5 * std::sin(2.0 * std::numbers::pi * (u + wobble) / p.period);
    }
    case TextureKind::blotch: {
      const double v = value_noise(p.seed + 3, x, y, p.cell * 1.5);
      const double patch = 1.0 / (1.0 + std::exp(-(v - 0.5) * 14.0));
      return 0.8 * patch + 0.2 * value_noise(p.seed + 4, x, y, p.cell / 3.0);
    }
  }
  return 0.0;
}

image::BinaryImage draw_object(ObjectKind kind, int64_t size, Rng& rng) {
  image::BinaryImage m(size, size);
  const double s = static_cast<double>(size);
  if (kind == ObjectKind::ellipse) {
    const double cx = rng.uniform(0.25, 0.75) * s, cy = rng.uniform(0.25, 0.75) * s;
    const double rx = rng.uniform(0.10, 0.35) * s, ry = rng.uniform(0.10, 0.35) * s;
    const double th = rng.uniform(0.0, std::numbers::pi);
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x) {
        const double dx = static_cast<double>(x) + 0.5 - cx, dy = static_cast<double>(y) + 0.5 - cy;
        const double u = dx * std::cos(th) + dy * std::sin(th);
        const double v = -dx * std::sin(th) + dy * std::cos(th);
        m.at(x, y) = (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0 ? 1 : 0;
      }
  } else {
    const int64_t balls = 2 + rng.below(3);
    const double cx0 = rng.uniform(0.3, 0.7) * s, cy0 = rng.uniform(0.3, 0.7) * s;
    std::vector<std::array<double, 3>> b;
    for (int64_t i = 0; i < balls; ++i)
      b.push_back({cx0 + rng.uniform(-0.2, 0.2) * s, cy0 + rng.uniform(-0.2, 0.2) * s,
                   rng.uniform(0.08, 0.18) * s});
    for (int64_t y = 0; y < size; ++y)
      for (int64_t x = 0; x < size; ++x) {
        double field = 0.0;
        for (const auto& [bx, by, r] : b) {
          const double dx = static_cast<double>(x) + 0.5 - bx, dy = static_cast<double>(y) + 0.5 - by;
          field += r * r / (dx * dx + dy * dy + 1e-9);
        }
        m.at(x, y) = field >= 1.0 ? 1 : 0;
      }
  }
  return m;
}

std::string texture_adjective(TextureKind k) {
  switch (k) {
    case TextureKind::value_noise: return "mottled";
    case TextureKind::stripes: return "striped";
    case TextureKind::blotch: return "blotchy";
  }
  return "mottled";
}

std::string object_noun(ObjectKind k) {
  return k == ObjectKind::ellipse ? "smooth oval creature" : "lumpy many-lobed creature";
}

uint8_t to_u8(double v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

}  // namespace

SyntheticSample synth_sample(const SynthConfig& cfg, int64_t index) {
  cfg.validate();
  Rng rng(mix64(cfg.seed) ^ mix64(static_cast<uint64_t>(index) + 0x1234567ULL));
  const int64_t size = cfg.size;
  const double s = static_cast<double>(size);

  const auto n_colors = static_cast<int64_t>(kPalette.size());
  const auto ia = static_cast<size_t>(rng.below(n_colors));
  auto ib = static_cast<size_t>(rng.below(n_colors - 1));
  if (ib == ia) ib = kPalette.size() - 1;
  const auto& ca = kPalette[ia];
  const auto& cb = kPalette[ib];
  TextureParams tp{rng.next(), s / rng.uniform(3.0, 6.0), rng.uniform(0.0, std::numbers::pi),
                   s / rng.uniform(3.0, 7.0)};
  const double phase_x = rng.uniform(0.5, 2.0), phase_y = rng.uniform(0.5, 2.0);
  const double shift = rng.uniform(-1.0, 1.0) * cfg.contrast_delta;

  image::BinaryImage mask;
  const double n_px = s * s;
  for (;;) {
    mask = draw_object(cfg.object_kind, size, rng);
    const double frac = static_cast<double>(mask.area()) / n_px;
    if (frac >= kMinMaskFraction && frac <= kMaxMaskFraction) break;
  }

  auto color = [&](double v, int c) { return ca.rgb[static_cast<size_t>(c)] * (1.0 - v) + cb.rgb[static_cast<size_t>(c)] * v; };

  image::RgbImage background(size, size);
  std::vector<double> diff(static_cast<size_t>(size * size * 3), 0.0);
  for (int64_t y = 0; y < size; ++y)
    for (int64_t x = 0; x < size; ++x) {
      const double v = texture_at(cfg.texture_kind, tp, static_cast<double>(x), static_cast<double>(y));
      const double vo = texture_at(cfg.texture_kind, tp, static_cast<double>(x) + phase_x,
                                   static_cast<double>(y) + phase_y);
      for (int c = 0; c < 3; ++c) {
        background.at(x, y, c) = to_u8(color(v, c));
        if (mask.at(x, y))
          diff[static_cast<size_t>((y * size + x) * 3 + c)] = color(vo, c) - color(v, c) + shift;
      }
    }

  // Bound the mean object/background divergence per channel by contrast_delta.
  const double area = static_cast<double>(mask.area());
  for (int c = 0; c < 3; ++c) {
    double mean_abs = 0.0;
    for (int64_t i = 0; i < size * size; ++i) mean_abs += std::abs(diff[static_cast<size_t>(i * 3 + c)]);
    mean_abs /= area;
    if (mean_abs > cfg.contrast_delta) {
      const double k = mean_abs > 0.0 ? cfg.contrast_delta / mean_abs : 0.0;
      for (int64_t i = 0; i < size * size; ++i) diff[static_cast<size_t>(i * 3 + c)] *= k;
    }
  }

  image::RgbImage img = background;
  for (size_t i = 0; i < img.pixels.size(); ++i) {
    // Truncation toward zero never increases |difference|.
    const auto step = static_cast<int>(std::trunc(diff[i] * 255.0));
    img.pixels[i] = static_cast<uint8_t>(std::clamp(static_cast<int>(background.pixels[i]) + step, 0, 255));
  }

  SyntheticSample out;
  auto& smp = out.sample;
  smp.id = "synth_" + std::to_string(cfg.seed) + "_" + std::to_string(index);
  smp.image = std::move(img);
  smp.mask = std::move(mask);
  smp.origin = SampleOrigin::synthetic;
  const std::string adj = texture_adjective(cfg.texture_kind);
  const std::string noun = object_noun(cfg.object_kind);
  const std::string tint = shift >= 0.0 ? "lighter" : "darker";
  smp.prompts.t_detail = "A " + adj + " " + ca.name + " and " + cb.name + " " + noun +
                         " rests against a " + adj + " " + ca.name + " background, its body pattern "
                         "continuing the surrounding texture, with only a faintly " + tint +
                         " tint separating it from the scene, and its edges dissolving into the pattern.";
  smp.prompts.t_simple = "A " + adj + " " + noun + " camouflaged in a " + ca.name + " and " + cb.name + " scene.";
  smp.prompts.source_image = smp.id + ".png";
  smp.prompts.mode = crdm::DialogueMode::camouflage;
  smp.prompts.outline_policy = crdm::OutlinePolicy::none;
  smp.prompts.vlm_id = "template";
  out.background = std::move(background);
  return out;
}

std::vector<SyntheticSample> generate(const SynthConfig& cfg, int64_t n) {
  if (n < 1) throw ConfigError("n", "must be >= 1");
  std::vector<SyntheticSample> out;
  out.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) out.push_back(synth_sample(cfg, i));
  return out;
}

std::vector<TrainingSample> generate_samples(const SynthConfig& cfg, int64_t n) {
  std::vector<TrainingSample> out;
  for (auto& s : generate(cfg, n)) out.push_back(std::move(s.sample));
  return out;
}

}  // namespace ctcig::data
