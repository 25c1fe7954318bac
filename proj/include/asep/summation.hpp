#pragma once

#include <cmath>
#include <complex>

namespace asep {

/// Neumaier-compensated accumulator.
class NeumaierSum {
 public:
  void add(double v) noexcept {
    const double t = sum_ + v;
    if (std::abs(sum_) >= std::abs(v))
      comp_ += (sum_ - t) + v;
    else
      comp_ += (v - t) + sum_;
    sum_ = t;
  }
  NeumaierSum& operator+=(double v) noexcept {
    add(v);
    return *this;
  }
  void merge(const NeumaierSum& o) noexcept {
    add(o.sum_);
    add(o.comp_);
  }
  double value() const noexcept { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

class ComplexSum {
 public:
  void add(std::complex<double> v) noexcept {
    re_.add(v.real());
    im_.add(v.imag());
  }
  ComplexSum& operator+=(std::complex<double> v) noexcept {
    add(v);
    return *this;
  }
  void merge(const ComplexSum& o) noexcept {
    re_.merge(o.re_);
    im_.merge(o.im_);
  }
  std::complex<double> value() const noexcept { return {re_.value(), im_.value()}; }

 private:
  NeumaierSum re_;
  NeumaierSum im_;
};

}  // namespace asep
