#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

namespace discloc {

/// Largest element count a tensor may hold (2^31 - 1).
inline constexpr std::size_t kMaxTensorElements = 2147483647u;

/// Channel-major feature volume (C x H x W). Element (c, y, x) lives at
/// offset c*H*W + y*W + x. Immutable once constructed.
class Tensor3 {
public:
    Tensor3() = default;
    /// Zero-filled tensor.
    Tensor3(std::size_t channels, std::size_t height, std::size_t width);
    /// Takes ownership of `data`; throws ShapeError when its length is not
    /// channels*height*width.
    Tensor3(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data);

    std::size_t channels() const noexcept { return channels_; }
    std::size_t height() const noexcept { return height_; }
    std::size_t width() const noexcept { return width_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    std::size_t offset(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return (c * height_ + y) * width_ + x;
    }
    float at(std::size_t c, std::size_t y, std::size_t x) const noexcept { return data_[offset(c, y, x)]; }

    std::span<const float> data() const noexcept { return data_; }
    /// The H*W plane of channel c.
    std::span<const float> channel(std::size_t c) const noexcept {
        return std::span<const float>(data_).subspan(c * height_ * width_, height_ * width_);
    }

    bool operator==(const Tensor3&) const = default;

private:
    std::size_t channels_ = 0;
    std::size_t height_ = 0;
    std::size_t width_ = 0;
    std::vector<float> data_;
};

/// Row-major matrix. Used for classifier weights (rows = classes,
/// cols = feature channels).
class Matrix2 {
public:
    Matrix2() = default;
    Matrix2(std::size_t rows, std::size_t cols);
    Matrix2(std::size_t rows, std::size_t cols, std::vector<float> data);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return data_.size(); }

    float at(std::size_t r, std::size_t c) const noexcept { return data_[r * cols_ + c]; }
    std::span<const float> data() const noexcept { return data_; }
    std::span<const float> row(std::size_t r) const noexcept {
        return std::span<const float>(data_).subspan(r * cols_, cols_);
    }

    bool operator==(const Matrix2&) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<float> data_;
};

/// Parsed NPY preamble.
struct TensorFileHeader {
    std::vector<std::size_t> shape;
    /// Byte offset of the payload (total preamble length).
    std::size_t payload_offset = 0;

    std::size_t element_count() const noexcept;
};

using AnyTensor = std::variant<Tensor3, Matrix2>;

/// Parses the NPY v1.0 preamble at the start of `bytes`.
TensorFileHeader parse_npy_header(std::span<const std::uint8_t> bytes);

/// Serialized NPY v1.0 preamble for `shape`, padded to a multiple of 64 bytes.
std::vector<std::uint8_t> make_npy_header(std::span<const std::size_t> shape);

/// Reads a '<f4' C-order NPY file. Three extents yield a Tensor3; two yield a
/// Matrix2; one extent (n) yields a 1 x n Matrix2.
AnyTensor read_tensor(const std::filesystem::path& path);

/// read_tensor, requiring three extents (ShapeError otherwise).
Tensor3 read_tensor3(const std::filesystem::path& path);
/// read_tensor, requiring one or two extents (ShapeError otherwise).
Matrix2 read_matrix2(const std::filesystem::path& path);

/// Writes atomically (temporary sibling file + rename). Non-finite values
/// raise InvalidValue before anything touches the filesystem.
void write_tensor(const Tensor3& tensor, const std::filesystem::path& path);
void write_tensor(const Matrix2& matrix, const std::filesystem::path& path);

/// Writes `bytes` to `path` through a temporary sibling and a rename.
void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace discloc
