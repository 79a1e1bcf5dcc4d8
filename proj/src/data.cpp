#include "dualscope/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "csv.hpp"
#include "dualscope/error.hpp"

namespace dualscope {
namespace {

std::string lowercase(std::string_view text) {
  std::string s(text);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
  return s;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

// Cursor over a PGM header: whitespace-separated tokens, '#' comments.
class PgmHeader {
 public:
  explicit PgmHeader(std::string_view bytes) : b_(bytes) {}

  std::size_t number(const char* what) {
    skip_space_and_comments();
    std::size_t v = 0;
    std::size_t digits = 0;
    while (pos_ < b_.size() && std::isdigit(static_cast<unsigned char>(b_[pos_]))) {
      v = v * 10 + static_cast<std::size_t>(b_[pos_] - '0');
      ++pos_;
      ++digits;
      if (v > (std::size_t{1} << 30)) throw FormatError(std::string("PGM ") + what + " is too large");
    }
    if (digits == 0) throw FormatError(std::string("PGM header: missing ") + what);
    return v;
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= b_.size() || !std::isspace(static_cast<unsigned char>(b_[pos_]))) {
      throw FormatError("PGM header: expected whitespace before raster");
    }
    return pos_ + 1;
  }

 private:
  void skip_space_and_comments() {
    while (pos_ < b_.size()) {
      if (std::isspace(static_cast<unsigned char>(b_[pos_]))) {
        ++pos_;
      } else if (b_[pos_] == '#') {
        while (pos_ < b_.size() && b_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::string_view b_;
  std::size_t pos_ = 2;  // past the magic
};

}  // namespace

std::string_view name(Gender g) noexcept { return kGenderNames[static_cast<std::size_t>(g)]; }
std::string_view name(AgeGroup a) noexcept { return kAgeGroupNames[static_cast<std::size_t>(a)]; }

Gender parse_gender(std::string_view text) {
  const std::string s = lowercase(text);
  if (s.empty()) return Gender::Unknown;
  if (s == "f") return Gender::Female;
  if (s == "m") return Gender::Male;
  for (std::size_t i = 0; i < kGenderNames.size(); ++i) {
    if (kGenderNames[i] == s) return static_cast<Gender>(i);
  }
  throw UnknownLabelError("unknown gender '" + std::string(text) + "'");
}

AgeGroup parse_age_group(std::string_view text) {
  const std::string s = lowercase(text);
  if (s.empty()) return AgeGroup::Unknown;
  for (std::size_t i = 0; i < kAgeGroupNames.size(); ++i) {
    if (kAgeGroupNames[i] == s) return static_cast<AgeGroup>(i);
  }
  throw UnknownLabelError("unknown age group '" + std::string(text) + "'");
}

LobeSample LobeSample::make(std::string patient_id, Tensor4 left, Tensor4 right, LobeClass left_label,
                            LobeClass right_label, Gender gender, AgeGroup age_group) {
  LobeSample s;
  s.patient_id = std::move(patient_id);
  s.left_image = std::move(left);
  s.right_image = std::move(right);
  s.left_label = left_label;
  s.right_label = right_label;
  s.gland_label = fuse_labels(left_label, right_label);
  s.gender = gender;
  s.age_group = age_group;
  return s;
}

Tensor4 decode_pgm(std::string_view bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || bytes[1] != '5') throw FormatError("not a binary PGM (expected P5 magic)");
  PgmHeader hdr(bytes);
  const std::size_t width = hdr.number("width");
  const std::size_t height = hdr.number("height");
  const std::size_t maxval = hdr.number("maxval");
  if (width == 0 || height == 0) throw FormatError("PGM has a zero dimension");
  if (maxval != 255) throw FormatError("unsupported PGM maxval " + std::to_string(maxval) + " (only 255)");
  const std::size_t start = hdr.raster_start();
  const std::size_t need = width * height;
  if (bytes.size() < start + need) {
    throw FormatError("PGM payload truncated: expected " + std::to_string(need) + " bytes, found " +
                      std::to_string(bytes.size() - std::min(bytes.size(), start)));
  }
  Tensor4 img(Shape4{1, height, width, 1});
  for (std::size_t i = 0; i < need; ++i) {
    img[i] = static_cast<float>(static_cast<unsigned char>(bytes[start + i])) / 255.0f;
  }
  return img;
}

Tensor4 load_pgm(const std::filesystem::path& path) {
  try {
    return decode_pgm(read_file(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string encode_pgm(const Tensor4& image) {
  const Shape4& s = image.shape();
  if (s.n != 1 || s.c != 1) throw ShapeError("encode_pgm expects a [1,H,W,1] image, got " + to_string(s));
  std::string out = "P5\n" + std::to_string(s.w) + " " + std::to_string(s.h) + "\n255\n";
  out.reserve(out.size() + s.h * s.w);
  for (const float v : image.data()) {
    const float clamped = std::clamp(v, 0.0f, 1.0f);
    out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(clamped * 255.0f))));
  }
  return out;
}

void save_pgm(const std::filesystem::path& path, const Tensor4& image) {
  const std::string bytes = encode_pgm(image);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw std::runtime_error("failed writing " + path.string());
}

Tensor4 resize_bilinear(const Tensor4& image, std::size_t target) {
  const Shape4& s = image.shape();
  if (s.n != 1 || s.h == 0 || s.w == 0) throw ShapeError("resize_bilinear expects a [1,H,W,C] image, got " + to_string(s));
  if (target == 0) throw GeometryError("resize target must be positive");
  if (s.h == target && s.w == target) return image;
  Tensor4 out(Shape4{1, target, target, s.c});
  auto source_coord = [target](std::size_t i, std::size_t extent) {
    return target == 1 ? 0.0 : static_cast<double>(i) * static_cast<double>(extent - 1) / static_cast<double>(target - 1);
  };
  for (std::size_t y = 0; y < target; ++y) {
    const double sy = source_coord(y, s.h);
    const auto y0 = static_cast<std::size_t>(std::floor(sy));
    const std::size_t y1 = std::min(y0 + 1, s.h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t x = 0; x < target; ++x) {
      const double sx = source_coord(x, s.w);
      const auto x0 = static_cast<std::size_t>(std::floor(sx));
      const std::size_t x1 = std::min(x0 + 1, s.w - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t c = 0; c < s.c; ++c) {
        const double top = (1.0 - fx) * image.at(0, y0, x0, c) + fx * image.at(0, y0, x1, c);
        const double bottom = (1.0 - fx) * image.at(0, y1, x0, c) + fx * image.at(0, y1, x1, c);
        out.at(0, y, x, c) = static_cast<float>((1.0 - fy) * top + fy * bottom);
      }
    }
  }
  return out;
}

std::vector<LobeSample> load_manifest(const std::filesystem::path& path, std::size_t image_size) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open manifest " + path.string());
  const auto base = path.parent_path();
  std::string line;
  if (!std::getline(f, line)) return {};
  if (detail::trim(line) != kManifestHeader) {
    throw FormatError(path.string() + ": header must be '" + std::string(kManifestHeader) + "'");
  }
  std::vector<LobeSample> out;
  std::size_t row = 1;
  while (std::getline(f, line)) {
    ++row;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split_csv_line(line);
    const std::string where = path.string() + " row " + std::to_string(row);
    if (cells.size() != 7) {
      throw FormatError(where + ": expected 7 columns, found " + std::to_string(cells.size()));
    }
    LobeClass left_label{};
    LobeClass right_label{};
    Gender gender{};
    AgeGroup age{};
    try {
      left_label = parse_lobe_class(cells[3]);
      right_label = parse_lobe_class(cells[4]);
      gender = parse_gender(cells[5]);
      age = parse_age_group(cells[6]);
    } catch (const UnknownLabelError& e) {
      throw UnknownLabelError(where + ": " + e.what());
    }
    auto load = [&](const std::string& rel) {
      const std::filesystem::path p = std::filesystem::path(rel).is_absolute() ? std::filesystem::path(rel) : base / rel;
      try {
        return resize_bilinear(load_pgm(p), image_size);
      } catch (const std::exception& e) {
        throw FormatError(where + ": " + e.what());
      }
    };
    out.push_back(LobeSample::make(cells[0], load(cells[1]), load(cells[2]), left_label, right_label, gender, age));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, std::span<const LobeSample> samples) {
  std::filesystem::create_directories(dir / "images");
  std::ostringstream manifest;
  manifest << kManifestHeader << "\n";
  for (const LobeSample& s : samples) {
    const std::string left = "images/" + s.patient_id + "_L.pgm";
    const std::string right = "images/" + s.patient_id + "_R.pgm";
    save_pgm(dir / left, s.left_image);
    save_pgm(dir / right, s.right_image);
    manifest << s.patient_id << "," << left << "," << right << "," << name(s.left_label) << ","
             << name(s.right_label) << "," << name(s.gender) << "," << name(s.age_group) << "\n";
  }
  std::ofstream f(dir / "manifest.csv", std::ios::trunc);
  if (!f) throw std::runtime_error("cannot write " + (dir / "manifest.csv").string());
  f << manifest.str();
}

LobeHistogram lobe_histogram(std::span<const LobeSample> samples) {
  LobeHistogram h;
  for (const auto& s : samples) {
    ++h.left[code(s.left_label)];
    ++h.right[code(s.right_label)];
  }
  return h;
}

std::array<std::size_t, kGlandClassCount> gland_histogram(std::span<const LobeSample> samples) {
  std::array<std::size_t, kGlandClassCount> h{};
  for (const auto& s : samples) ++h[code(s.gland_label)];
  return h;
}

}  // namespace dualscope
