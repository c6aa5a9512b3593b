#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace lire {

// CRC-32 (IEEE 802.3, reflected, polynomial 0xEDB88320). crc32("123456789")
// == 0xCBF43926.
uint32_t crc32(const void* data, size_t len, uint32_t seed = 0);

/// Little-endian binary writer over an in-memory buffer. Shared primitive
/// encoding for head checkpoints and vector indexes.
class BinWriter {
public:
    void u8(uint8_t v) { buf_.push_back(v); }
    void u16(uint16_t v);
    void u32(uint32_t v);
    void u64(uint64_t v);
    void f32(float v);
    void bytes(const void* p, size_t n);
    void str16(const std::string& s); // u16 length prefix + UTF-8 bytes

    const std::vector<uint8_t>& data() const { return buf_; }
    size_t size() const { return buf_.size(); }

private:
    std::vector<uint8_t> buf_;
};

/// Little-endian reader over a byte span. Throws Err::CorruptIndex on
/// truncation.
class BinReader {
public:
    BinReader(const uint8_t* p, size_t n) : p_(p), n_(n) {}

    uint8_t u8();
    uint16_t u16();
    uint32_t u32();
    uint64_t u64();
    float f32();
    std::string str16();
    void bytes(void* out, size_t n);

    size_t pos() const { return pos_; }
    size_t remaining() const { return n_ - pos_; }

private:
    void need(size_t n);
    const uint8_t* p_;
    size_t n_;
    size_t pos_ = 0;
};

std::vector<uint8_t> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);

/// Writes via a temp file in the same directory, then renames over the
/// target, so readers never observe a partial file.
void write_file_atomic(const std::string& path, const void* data, size_t len);
void write_file_atomic(const std::string& path, const std::string& text);

/// CRC-32 of a file's bytes as 8 hex digits; used as a cheap content digest
/// in manifests and index metadata.
std::string file_digest(const std::string& path);

} // namespace lire
