#include "ctcig/crdm/mock_vlm.hpp"

#include <array>
#include <cmath>
#include <cstring>

#include <png.h>

#include "ctcig/errors.hpp"

namespace ctcig::crdm {

namespace {

uint64_t fnv1a(const std::string& s, uint64_t h = 0xCBF29CE484222325ULL) {
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

struct ImageTraits {
  std::string color = "earthy";
  std::string texture = "mottled";
};

ImageTraits inspect(const std::string& png) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, png.data(), png.size())) return {};
  image.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> px(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, px.data(), 0, nullptr)) {
    png_image_free(&image);
    return {};
  }
  const int64_t w = image.width, h = image.height;
  std::array<double, 3> mean{};
  double grad = 0.0;
  for (int64_t y = 0; y < h; ++y)
    for (int64_t x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) {
        const double v = px[static_cast<size_t>((y * w + x) * 3 + c)] / 255.0;
        mean[static_cast<size_t>(c)] += v;
        if (x + 1 < w) grad += std::abs(px[static_cast<size_t>((y * w + x + 1) * 3 + c)] / 255.0 - v);
      }
  for (auto& m : mean) m /= static_cast<double>(w * h);
  grad /= static_cast<double>(std::max<int64_t>(1, (w - 1) * h * 3));

  struct Named {
    const char* name;
    std::array<double, 3> rgb;
  };
  static constexpr std::array<Named, 8> palette{{{"olive", {0.50, 0.50, 0.22}},
                                                 {"sandy", {0.78, 0.68, 0.48}},
                                                 {"mossy green", {0.35, 0.47, 0.25}},
                                                 {"slate grey", {0.44, 0.50, 0.56}},
                                                 {"rust brown", {0.55, 0.30, 0.18}},
                                                 {"ochre", {0.80, 0.60, 0.20}},
                                                 {"bark brown", {0.40, 0.30, 0.22}},
                                                 {"lichen grey", {0.62, 0.64, 0.56}}}};
  ImageTraits t;
  double best = 1e9;
  for (const auto& p : palette) {
    double d = 0.0;
    for (size_t c = 0; c < 3; ++c) d += (p.rgb[c] - mean[c]) * (p.rgb[c] - mean[c]);
    if (d < best) {
      best = d;
      t.color = p.name;
    }
  }
  t.texture = grad > 0.08 ? "finely patterned" : grad > 0.03 ? "mottled" : "smooth";
  return t;
}

template <size_t N>
const char* pick(const std::array<const char*, N>& xs, uint64_t h) {
  return xs[h % N];
}

}  // namespace

std::string mock_vlm_reply(const ChatRequest& req, uint64_t seed, const DialogueTemplates& tpl) {
  int user_turns = 0;
  bool imagined = false, notice = false, prohibited = false;
  const std::string* image = nullptr;
  for (const auto& m : req.messages) {
    if (m.role == "system") {
      notice = notice || m.text == tpl.sys_outline_notice;
      prohibited = prohibited || m.text == tpl.sys_outline_prohibition;
    } else if (m.role == "user") {
      ++user_turns;
      if (m.image_png && !image) image = &*m.image_png;
      if (user_turns == 2) imagined = m.text == tpl.q2_non_camouflage;
    }
  }
  if (!image) throw ProtocolError("mock VLM received no image");
  const auto traits = inspect(*image);
  const uint64_t h = fnv1a(*image, fnv1a(std::to_string(seed)));

  static constexpr std::array<const char*, 6> nouns{"lizard", "moth", "frog", "flounder", "stick insect", "owl"};
  static constexpr std::array<const char*, 5> habitats{"weathered tree bark", "a lichen-covered rock",
                                                       "a sandy riverbed", "a bed of dry leaves",
                                                       "a mossy forest floor"};
  const std::string noun = pick(nouns, h);
  const std::string habitat = pick(habitats, h >> 17);
  const bool talk_outline = notice && !prohibited;
  const std::string c = traits.color, tex = traits.texture;

  switch (user_turns) {
    case 1:
      return "The main object is a " + noun + " with " + tex + " " + c + " skin, resting flat with its limbs tucked in" +
             (talk_outline ? ", highlighted by the colored outline around its body." : ".");
    case 2:
      if (imagined)
        return "An ideal scenery would be " + habitat + " in " + c + " tones, where the " + noun + "'s " + tex +
               " pattern repeats the texture of the ground and its colors dissolve into the surroundings.";
      return "The " + noun + " lies on " + habitat + " whose " + c + " tones and " + tex +
             " pattern it shares, so its body merges with the background and its edges disappear into the scene.";
    case 3:
      return "A " + tex + " " + c + " " + noun + " lies motionless on " + habitat + ", its skin repeating the " + c +
             " pattern of the surroundings under soft natural light, with shadows and texture continuing across "
             "its body so that it merges into the scene" +
             (talk_outline ? ", its shape traced by a bright outlined contour." : ".");
    default:
      return "A " + c + " " + noun + " camouflaged on " + habitat +
             (talk_outline ? " with a highlighted outline." : ".");
  }
}

}  // namespace ctcig::crdm
