#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace birdsed {

// Error categories map onto the CLI exit codes: ConfigError -> 1,
// DataError -> 2, NumericError -> 3.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct DataError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

// Dense row-major 2-D array. Spectrograms are (mel_bins x frames),
// prediction matrices are (rows x n_classes).
template <typename T>
class Mat {
 public:
  Mat() = default;
  Mat(int rows, int cols, T fill = T{})
      : rows_(rows), cols_(cols),
        v_(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols), fill) {}

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return v_.size(); }

  T* data() { return v_.data(); }
  const T* data() const { return v_.data(); }
  T* row(int r) { return v_.data() + static_cast<std::size_t>(r) * cols_; }
  const T* row(int r) const { return v_.data() + static_cast<std::size_t>(r) * cols_; }

  T& operator()(int r, int c) { return v_[static_cast<std::size_t>(r) * cols_ + c]; }
  const T& operator()(int r, int c) const {
    return v_[static_cast<std::size_t>(r) * cols_ + c];
  }

  bool same_shape(const Mat& o) const { return rows_ == o.rows_ && cols_ == o.cols_; }

  friend bool operator==(const Mat&, const Mat&) = default;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<T> v_;
};

}  // namespace birdsed
