#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace enskit {

/// Little-endian flat float64 block files. Byte order is fixed so files move
/// between hosts; round-trips are bit-exact.
void write_f64_file(const std::filesystem::path& path, const std::vector<double>& values);
std::vector<double> read_f64_file(const std::filesystem::path& path);

void append_f64_le(std::vector<std::uint8_t>& out, double value);
double read_f64_le(const std::uint8_t* bytes);
void append_i32_le(std::vector<std::uint8_t>& out, std::int32_t value);
std::int32_t read_i32_le(const std::uint8_t* bytes);

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes);
std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path);

void write_text(const std::filesystem::path& path, const std::string& text);
std::string read_text(const std::filesystem::path& path);

/// FNV-1a 64-bit hash, the integrity checksum used across file formats.
std::uint64_t fnv1a64(const std::uint8_t* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& text);

std::string hash_hex(std::uint64_t hash);

} // namespace enskit
