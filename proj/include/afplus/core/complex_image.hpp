#pragma once

#include <string_view>

#include "afplus/core/array2d.hpp"

namespace afp {

enum class Domain { Image, KSpace };

constexpr std::string_view to_string(Domain d) noexcept {
  return d == Domain::Image ? "image" : "k-space";
}

/// H x W complex array tagged with the domain it lives in. Holds either an
/// image X or its centered spectrum Y.
class ComplexImage {
 public:
  static constexpr int kMinSide = 8;

  ComplexImage() = default;
  ComplexImage(int height, int width, Domain domain)
      : domain_(domain), data_(checked(height, width), width) {}
  ComplexImage(Array2D<cplx> data, Domain domain) : domain_(domain), data_(std::move(data)) {
    checked(data_.height(), data_.width());
  }

  static ComplexImage from_real(const RealImage& img) {
    ComplexImage out(img.height(), img.width(), Domain::Image);
    for (std::size_t i = 0; i < img.size(); ++i) out.values()[i] = img.values()[i];
    return out;
  }

  int height() const noexcept { return data_.height(); }
  int width() const noexcept { return data_.width(); }
  std::size_t size() const noexcept { return data_.size(); }
  Domain domain() const noexcept { return domain_; }

  cplx& operator()(int r, int c) noexcept { return data_(r, c); }
  const cplx& operator()(int r, int c) const noexcept { return data_(r, c); }
  std::span<cplx> row(int r) noexcept { return data_.row(r); }
  std::span<const cplx> row(int r) const noexcept { return data_.row(r); }
  std::span<cplx> values() noexcept { return data_.values(); }
  std::span<const cplx> values() const noexcept { return data_.values(); }

  const Array2D<cplx>& array() const noexcept { return data_; }
  Array2D<cplx>& array() noexcept { return data_; }

  bool same_shape(const ComplexImage& o) const noexcept { return data_.same_shape(o.data_); }

  /// Elementwise modulus.
  RealImage magnitude() const {
    RealImage out(height(), width());
    for (std::size_t i = 0; i < size(); ++i) out.values()[i] = std::abs(values()[i]);
    return out;
  }

  friend bool operator==(const ComplexImage&, const ComplexImage&) = default;

 private:
  static int checked(int h, int w) {
    require(h >= kMinSide && w >= kMinSide,
            "ComplexImage: height and width must be >= 8, got " + std::to_string(h) + "x" +
                std::to_string(w));
    return h;
  }

  Domain domain_ = Domain::Image;
  Array2D<cplx> data_;
};

inline void require_domain(const ComplexImage& x, Domain expected, std::string_view op) {
  if (x.domain() != expected) {
    throw ContractViolation(std::string(op) + ": expected " + std::string(to_string(expected)) +
                            " input, got " + std::string(to_string(x.domain())));
  }
}

inline void require_finite(const ComplexImage& x, std::string_view op) {
  if (!all_finite(x.array())) throw ContractViolation(std::string(op) + ": input is not finite");
}

inline double relative_l2(const ComplexImage& a, const ComplexImage& b) {
  return relative_l2(a.array(), b.array());
}

}  // namespace afp
