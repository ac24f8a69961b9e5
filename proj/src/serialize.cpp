#include "enskit/serialize.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "enskit/common.hpp"

namespace enskit {

void append_f64_le(std::vector<std::uint8_t>& out, double value) {
    std::uint64_t bits = std::bit_cast<std::uint64_t>(value);
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
}

double read_f64_le(const std::uint8_t* bytes) {
    std::uint64_t bits = 0;
    for (int i = 7; i >= 0; --i) {
        bits = (bits << 8) | bytes[i];
    }
    return std::bit_cast<double>(bits);
}

void append_i32_le(std::vector<std::uint8_t>& out, std::int32_t value) {
    std::uint32_t bits = static_cast<std::uint32_t>(value);
    for (int i = 0; i < 4; ++i) {
        out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
    }
}

std::int32_t read_i32_le(const std::uint8_t* bytes) {
    std::uint32_t bits = 0;
    for (int i = 3; i >= 0; --i) {
        bits = (bits << 8) | bytes[i];
    }
    return static_cast<std::int32_t>(bits);
}

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    ENSKIT_THROW_IF(!out, IoError, "cannot open " << path.string() << " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    ENSKIT_THROW_IF(!out, IoError, "write to " << path.string() << " failed");
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    ENSKIT_THROW_IF(!in, IoError, "cannot open " << path.string() << " for reading");
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    ENSKIT_THROW_IF(in.bad(), IoError, "read from " << path.string() << " failed");
    return bytes;
}

void write_f64_file(const std::filesystem::path& path, const std::vector<double>& values) {
    std::vector<std::uint8_t> bytes;
    bytes.reserve(values.size() * 8);
    for (double v : values) {
        append_f64_le(bytes, v);
    }
    write_bytes(path, bytes);
}

std::vector<double> read_f64_file(const std::filesystem::path& path) {
    std::vector<std::uint8_t> bytes = read_bytes(path);
    ENSKIT_THROW_IF(bytes.size() % 8 != 0, IoError,
                    path.string() << " has " << bytes.size()
                                  << " bytes, not a whole number of float64 values");
    std::vector<double> values(bytes.size() / 8);
    for (std::size_t i = 0; i < values.size(); ++i) {
        values[i] = read_f64_le(bytes.data() + i * 8);
    }
    return values;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    ENSKIT_THROW_IF(!out, IoError, "cannot open " << path.string() << " for writing");
    out << text;
    ENSKIT_THROW_IF(!out, IoError, "write to " << path.string() << " failed");
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    ENSKIT_THROW_IF(!in, IoError, "cannot open " << path.string() << " for reading");
    std::ostringstream os;
    os << in.rdbuf();
    ENSKIT_THROW_IF(in.bad(), IoError, "read from " << path.string() << " failed");
    return os.str();
}

std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (std::size_t i = 0; i < size; ++i) {
        hash ^= data[i];
        hash *= 0x100000001b3ULL;
    }
    return hash;
}

std::uint64_t fnv1a64(const std::string& text) {
    return fnv1a64(reinterpret_cast<const std::uint8_t*>(text.data()), text.size());
}

std::string hash_hex(std::uint64_t hash) {
    static const char* digits = "0123456789abcdef";
    std::string hex(16, '0');
    for (int i = 15; i >= 0; --i) {
        hex[static_cast<std::size_t>(i)] = digits[hash & 0xF];
        hash >>= 4;
    }
    return hex;
}

} // namespace enskit
