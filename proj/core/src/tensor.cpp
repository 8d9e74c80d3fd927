#include "discloc/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <optional>
#include <string>
#include <system_error>
#include <thread>

#include "discloc/errors.hpp"

namespace discloc {
namespace {

constexpr std::uint8_t kMagic[6] = {0x93, 'N', 'U', 'M', 'P', 'Y'};
constexpr std::size_t kFixedPreamble = 10;  // magic + version + header length
constexpr std::size_t kAlignment = 64;

std::size_t checked_product(std::span<const std::size_t> extents) {
    std::size_t total = 1;
    for (std::size_t e : extents) {
        if (e != 0 && total > kMaxTensorElements / e) {
            throw UnsupportedSize("tensor exceeds 2^31-1 elements");
        }
        total *= e;
    }
    if (total > kMaxTensorElements) throw UnsupportedSize("tensor exceeds 2^31-1 elements");
    return total;
}

// Minimal reader for the python dict literal numpy writes into the preamble:
// {'descr': '<f4', 'fortran_order': False, 'shape': (2, 3), }
class HeaderDictParser {
public:
    explicit HeaderDictParser(std::string_view text) : text_(text) {}

    struct Fields {
        std::optional<std::string> descr;
        std::optional<bool> fortran_order;
        std::optional<std::vector<std::size_t>> shape;
    };

    Fields parse() {
        Fields fields;
        skip_ws();
        expect('{');
        while (true) {
            skip_ws();
            if (peek() == '}') {
                ++pos_;
                break;
            }
            std::string key = parse_string();
            skip_ws();
            expect(':');
            skip_ws();
            if (key == "descr") {
                fields.descr = parse_string();
            } else if (key == "fortran_order") {
                fields.fortran_order = parse_bool();
            } else if (key == "shape") {
                fields.shape = parse_shape();
            } else {
                throw FormatError("unexpected NPY header key '" + key + "'");
            }
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            skip_ws();
            expect('}');
            break;
        }
        skip_ws();
        if (pos_ != text_.size()) throw FormatError("trailing bytes after NPY header dictionary");
        return fields;
    }

private:
    char peek() const {
        if (pos_ >= text_.size()) throw FormatError("truncated NPY header dictionary");
        return text_[pos_];
    }
    void expect(char c) {
        if (peek() != c) throw FormatError(std::string("malformed NPY header: expected '") + c + "'");
        ++pos_;
    }
    void skip_ws() {
        while (pos_ < text_.size() && (text_[pos_] == ' ' || text_[pos_] == '\n' || text_[pos_] == '\t')) ++pos_;
    }
    std::string parse_string() {
        char quote = peek();
        if (quote != '\'' && quote != '"') throw FormatError("malformed NPY header: expected string");
        ++pos_;
        auto end = text_.find(quote, pos_);
        if (end == std::string_view::npos) throw FormatError("unterminated string in NPY header");
        std::string out(text_.substr(pos_, end - pos_));
        pos_ = end + 1;
        return out;
    }
    bool parse_bool() {
        if (text_.substr(pos_, 4) == "True") {
            pos_ += 4;
            return true;
        }
        if (text_.substr(pos_, 5) == "False") {
            pos_ += 5;
            return false;
        }
        throw FormatError("malformed NPY header: expected True/False");
    }
    std::vector<std::size_t> parse_shape() {
        expect('(');
        std::vector<std::size_t> shape;
        while (true) {
            skip_ws();
            if (peek() == ')') {
                ++pos_;
                break;
            }
            if (!std::isdigit(static_cast<unsigned char>(peek()))) throw FormatError("malformed NPY shape");
            std::size_t value = 0;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
                std::size_t digit = static_cast<std::size_t>(text_[pos_] - '0');
                if (value > (kMaxTensorElements - digit) / 10) throw UnsupportedSize("NPY extent too large");
                value = value * 10 + digit;
                ++pos_;
            }
            shape.push_back(value);
            skip_ws();
            if (peek() == ',') {
                ++pos_;
                continue;
            }
            expect(')');
            break;
        }
        return shape;
    }

    std::string_view text_;
    std::size_t pos_ = 0;
};

void require_finite(std::span<const float> values) {
    auto bad = std::find_if(values.begin(), values.end(), [](float v) { return !std::isfinite(v); });
    if (bad != values.end()) {
        throw InvalidValue("non-finite value at element " + std::to_string(bad - values.begin()));
    }
}

std::vector<std::uint8_t> encode(std::span<const std::size_t> shape, std::span<const float> values) {
    require_finite(values);
    std::vector<std::uint8_t> bytes = make_npy_header(shape);
    bytes.reserve(bytes.size() + values.size() * 4);
    for (float v : values) {
        auto bits = std::bit_cast<std::uint32_t>(v);
        for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
    return bytes;
}

std::vector<std::uint8_t> slurp(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (in.bad()) throw IoError("read failed: " + path.string());
    return bytes;
}

}  // namespace

Tensor3::Tensor3(std::size_t channels, std::size_t height, std::size_t width)
    : Tensor3(channels, height, width, std::vector<float>(channels * height * width, 0.0f)) {}

Tensor3::Tensor3(std::size_t channels, std::size_t height, std::size_t width, std::vector<float> data)
    : channels_(channels), height_(height), width_(width), data_(std::move(data)) {
    const std::size_t extents[] = {channels, height, width};
    if (checked_product(extents) != data_.size()) {
        throw ShapeError("Tensor3 data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(channels) + "x" + std::to_string(height) + "x" + std::to_string(width));
    }
}

Matrix2::Matrix2(std::size_t rows, std::size_t cols)
    : Matrix2(rows, cols, std::vector<float>(rows * cols, 0.0f)) {}

Matrix2::Matrix2(std::size_t rows, std::size_t cols, std::vector<float> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
    const std::size_t extents[] = {rows, cols};
    if (checked_product(extents) != data_.size()) {
        throw ShapeError("Matrix2 data length " + std::to_string(data_.size()) + " != " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
}

std::size_t TensorFileHeader::element_count() const noexcept {
    std::size_t total = 1;
    for (std::size_t e : shape) total *= e;
    return total;
}

TensorFileHeader parse_npy_header(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFixedPreamble || !std::equal(std::begin(kMagic), std::end(kMagic), bytes.begin())) {
        throw FormatError("missing NPY magic");
    }
    if (bytes[6] != 0x01 || bytes[7] != 0x00) {
        throw FormatError("unsupported NPY version " + std::to_string(bytes[6]) + "." + std::to_string(bytes[7]));
    }
    const std::size_t header_len = static_cast<std::size_t>(bytes[8]) | (static_cast<std::size_t>(bytes[9]) << 8);
    if (bytes.size() < kFixedPreamble + header_len) throw FormatError("truncated NPY header");
    if (header_len == 0 || bytes[kFixedPreamble + header_len - 1] != '\n') {
        throw FormatError("NPY header not newline-terminated");
    }

    std::string_view text(reinterpret_cast<const char*>(bytes.data()) + kFixedPreamble, header_len);
    auto fields = HeaderDictParser(text).parse();
    if (!fields.descr || !fields.fortran_order || !fields.shape) {
        throw FormatError("NPY header lacks descr/fortran_order/shape");
    }
    if (*fields.descr != "<f4") throw UnsupportedDtype("unsupported dtype '" + *fields.descr + "'");
    if (*fields.fortran_order) throw FormatError("fortran_order=True is not supported");
    const auto& shape = *fields.shape;
    if (shape.empty() || shape.size() > 3) {
        throw FormatError("NPY shape must have 1-3 extents, got " + std::to_string(shape.size()));
    }
    if (std::any_of(shape.begin(), shape.end(), [](std::size_t e) { return e == 0; })) {
        throw FormatError("NPY shape extents must be positive");
    }
    checked_product(shape);
    return TensorFileHeader{shape, kFixedPreamble + header_len};
}

std::vector<std::uint8_t> make_npy_header(std::span<const std::size_t> shape) {
    std::string dict = "{'descr': '<f4', 'fortran_order': False, 'shape': (";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i > 0) dict += ", ";
        dict += std::to_string(shape[i]);
    }
    if (shape.size() == 1) dict += ",";
    dict += "), }";

    const std::size_t unpadded = kFixedPreamble + dict.size() + 1;
    const std::size_t total = (unpadded + kAlignment - 1) / kAlignment * kAlignment;
    dict.append(total - unpadded, ' ');
    dict.push_back('\n');

    std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
    out.push_back(0x01);
    out.push_back(0x00);
    out.push_back(static_cast<std::uint8_t>(dict.size() & 0xff));
    out.push_back(static_cast<std::uint8_t>(dict.size() >> 8));
    out.insert(out.end(), dict.begin(), dict.end());
    return out;
}

AnyTensor read_tensor(const std::filesystem::path& path) {
    const auto bytes = slurp(path);
    const auto header = parse_npy_header(bytes);
    const std::size_t count = header.element_count();
    if (bytes.size() - header.payload_offset != count * 4) {
        throw CorruptFile(path.string() + ": payload holds " + std::to_string(bytes.size() - header.payload_offset) +
                          " bytes, shape requires " + std::to_string(count * 4));
    }

    std::vector<float> values(count);
    const std::uint8_t* p = bytes.data() + header.payload_offset;
    for (std::size_t i = 0; i < count; ++i, p += 4) {
        std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
        values[i] = std::bit_cast<float>(bits);
    }
    try {
        require_finite(values);
    } catch (const InvalidValue& e) {
        throw InvalidValue(path.string() + ": " + e.what());
    }

    const auto& s = header.shape;
    switch (s.size()) {
        case 3: return Tensor3(s[0], s[1], s[2], std::move(values));
        case 2: return Matrix2(s[0], s[1], std::move(values));
        default: return Matrix2(1, s[0], std::move(values));
    }
}

Tensor3 read_tensor3(const std::filesystem::path& path) {
    auto any = read_tensor(path);
    if (auto* t = std::get_if<Tensor3>(&any)) return std::move(*t);
    throw ShapeError(path.string() + ": expected a 3-D tensor");
}

Matrix2 read_matrix2(const std::filesystem::path& path) {
    auto any = read_tensor(path);
    if (auto* m = std::get_if<Matrix2>(&any)) return std::move(*m);
    throw ShapeError(path.string() + ": expected a 1-D or 2-D tensor");
}

void write_tensor(const Tensor3& tensor, const std::filesystem::path& path) {
    const std::size_t shape[] = {tensor.channels(), tensor.height(), tensor.width()};
    write_file_atomic(path, encode(shape, tensor.data()));
}

void write_tensor(const Matrix2& matrix, const std::filesystem::path& path) {
    const std::size_t shape[] = {matrix.rows(), matrix.cols()};
    write_file_atomic(path, encode(shape, matrix.data()));
}

void write_file_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    static std::atomic<unsigned long> counter{0};
    auto tmp = path;
    tmp += ".tmp" + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()) % 100000) + "_" +
           std::to_string(counter.fetch_add(1));
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
        out.flush();
        if (!out) {
            std::error_code ignored;
            std::filesystem::remove(tmp, ignored);
            throw IoError("write failed: " + tmp.string());
        }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::error_code ignored;
        std::filesystem::remove(tmp, ignored);
        throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
    }
}

void write_file_atomic(const std::filesystem::path& path, std::string_view text) {
    write_file_atomic(path, std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

}  // namespace discloc
