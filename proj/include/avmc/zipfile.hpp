#pragma once

#include <zlib.h>

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "avmc/errors.hpp"

namespace avmc {

static_assert(std::endian::native == std::endian::little,
              "archive I/O assumes a little-endian host");

namespace zipdetail {

inline void put16(std::string& out, std::uint16_t v) {
  out.append(reinterpret_cast<const char*>(&v), 2);
}
inline void put32(std::string& out, std::uint32_t v) {
  out.append(reinterpret_cast<const char*>(&v), 4);
}
inline void put64(std::string& out, std::uint64_t v) {
  out.append(reinterpret_cast<const char*>(&v), 8);
}

inline std::uint16_t get16(const char* p) {
  std::uint16_t v;
  std::memcpy(&v, p, 2);
  return v;
}
inline std::uint32_t get32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
inline std::uint64_t get64(const char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  return v;
}

constexpr std::uint32_t kLocalSig = 0x04034b50;
constexpr std::uint32_t kCentralSig = 0x02014b50;
constexpr std::uint32_t kEocdSig = 0x06054b50;
constexpr std::uint32_t kEocd64Sig = 0x06064b50;
constexpr std::uint32_t kEocd64LocatorSig = 0x07064b50;
constexpr std::uint32_t kMax32 = 0xFFFFFFFFu;
constexpr std::uint16_t kMax16 = 0xFFFFu;

}  // namespace zipdetail

// Writes entries uncompressed (method 0) with a fixed 1980-01-01 timestamp,
// so identical content yields byte-identical archives. Entries stream to
// disk as added; finish() appends the central directory. If the writer is
// destroyed before finish(), the partial file is removed.
class ZipWriter {
 public:
  explicit ZipWriter(std::string path) : path_(std::move(path)) {
    out_.open(path_, std::ios::binary | std::ios::trunc);
    if (!out_) throw FormatError("cannot open '" + path_ + "' for writing");
  }

  ZipWriter(const ZipWriter&) = delete;
  ZipWriter& operator=(const ZipWriter&) = delete;

  ~ZipWriter() {
    if (!finished_) {
      out_.close();
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }

  void add(const std::string& name, const void* data, std::size_t size) {
    using namespace zipdetail;
    if (finished_) throw FormatError("ZipWriter: add after finish");
    if (name.empty() || name.size() > kMax16) throw FormatError("ZipWriter: bad entry name");
    if (size > kMax32) {
      throw FormatError("ZipWriter: entry '" + name + "' exceeds the 4 GiB single-entry limit");
    }
    Entry e;
    e.name = name;
    e.size = static_cast<std::uint32_t>(size);
    e.crc = static_cast<std::uint32_t>(
        ::crc32(0L, static_cast<const Bytef*>(data), static_cast<uInt>(size)));
    e.offset = offset_;

    std::string header;
    put32(header, kLocalSig);
    put16(header, 20);      // version needed
    put16(header, 0);       // flags
    put16(header, 0);       // method: store
    put16(header, 0);       // mod time
    put16(header, 0x21);    // mod date: 1980-01-01
    put32(header, e.crc);
    put32(header, e.size);  // compressed == uncompressed
    put32(header, e.size);
    put16(header, static_cast<std::uint16_t>(name.size()));
    put16(header, 0);  // extra length
    header += name;

    out_.write(header.data(), static_cast<std::streamsize>(header.size()));
    out_.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out_) throw FormatError("ZipWriter: write failed for '" + path_ + "'");
    offset_ += header.size() + size;
    entries_.push_back(std::move(e));
  }

  void add(const std::string& name, const std::string& bytes) {
    add(name, bytes.data(), bytes.size());
  }

  void finish() {
    using namespace zipdetail;
    if (finished_) return;
    std::string cd;
    for (const Entry& e : entries_) {
      const bool wide = e.offset > kMax32;
      put32(cd, kCentralSig);
      put16(cd, 45);  // version made by
      put16(cd, wide ? 45 : 20);
      put16(cd, 0);
      put16(cd, 0);     // store
      put16(cd, 0);     // time
      put16(cd, 0x21);  // date
      put32(cd, e.crc);
      put32(cd, e.size);
      put32(cd, e.size);
      put16(cd, static_cast<std::uint16_t>(e.name.size()));
      put16(cd, wide ? 12 : 0);  // extra length
      put16(cd, 0);              // comment length
      put16(cd, 0);              // disk
      put16(cd, 0);              // internal attrs
      put32(cd, 0);              // external attrs
      put32(cd, wide ? kMax32 : static_cast<std::uint32_t>(e.offset));
      cd += e.name;
      if (wide) {  // zip64 extra holding the 64-bit offset
        put16(cd, 0x0001);
        put16(cd, 8);
        put64(cd, e.offset);
      }
    }
    const std::uint64_t cd_offset = offset_;
    const std::uint64_t cd_size = cd.size();
    const std::uint64_t n = entries_.size();

    std::string tail;
    const bool need64 = n > kMax16 || cd_offset > kMax32 || cd_size > kMax32;
    if (need64) {
      const std::uint64_t eocd64_offset = cd_offset + cd_size;
      put32(tail, kEocd64Sig);
      put64(tail, 44);  // record size excluding the first 12 bytes
      put16(tail, 45);
      put16(tail, 45);
      put32(tail, 0);
      put32(tail, 0);
      put64(tail, n);
      put64(tail, n);
      put64(tail, cd_size);
      put64(tail, cd_offset);
      put32(tail, kEocd64LocatorSig);
      put32(tail, 0);
      put64(tail, eocd64_offset);
      put32(tail, 1);
    }
    put32(tail, kEocdSig);
    put16(tail, 0);
    put16(tail, 0);
    put16(tail, n > kMax16 ? kMax16 : static_cast<std::uint16_t>(n));
    put16(tail, n > kMax16 ? kMax16 : static_cast<std::uint16_t>(n));
    put32(tail, cd_size > kMax32 ? kMax32 : static_cast<std::uint32_t>(cd_size));
    put32(tail, cd_offset > kMax32 ? kMax32 : static_cast<std::uint32_t>(cd_offset));
    put16(tail, 0);

    out_.write(cd.data(), static_cast<std::streamsize>(cd.size()));
    out_.write(tail.data(), static_cast<std::streamsize>(tail.size()));
    out_.close();
    if (out_.fail()) throw FormatError("ZipWriter: finalize failed for '" + path_ + "'");
    finished_ = true;
  }

 private:
  struct Entry {
    std::string name;
    std::uint32_t crc = 0;
    std::uint32_t size = 0;
    std::uint64_t offset = 0;
  };

  std::string path_;
  std::ofstream out_;
  std::uint64_t offset_ = 0;
  std::vector<Entry> entries_;
  bool finished_ = false;
};

// Random-access reader for archives written by ZipWriter or by standard
// tools; supports stored and deflated entries and zip64 offsets.
class ZipReader {
 public:
  explicit ZipReader(std::string path) : path_(std::move(path)) {
    in_.open(path_, std::ios::binary);
    if (!in_) throw FormatError("cannot open '" + path_ + "'");
    parse_directory();
  }

  bool contains(const std::string& name) const { return entries_.count(name) > 0; }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    out.reserve(entries_.size());
    for (const auto& [name, entry] : entries_) out.push_back(name);
    return out;
  }

  std::string read(const std::string& name) {
    using namespace zipdetail;
    auto it = entries_.find(name);
    if (it == entries_.end()) {
      throw FormatError("archive '" + path_ + "' has no entry '" + name + "'");
    }
    const Entry& e = it->second;

    // The local header repeats name/extra with possibly different lengths.
    char local[30];
    in_.seekg(static_cast<std::streamoff>(e.offset));
    in_.read(local, 30);
    if (!in_ || get32(local) != kLocalSig) {
      throw FormatError("archive '" + path_ + "': bad local header for '" + name + "'");
    }
    const std::uint16_t nlen = get16(local + 26);
    const std::uint16_t elen = get16(local + 28);
    in_.seekg(static_cast<std::streamoff>(e.offset + 30 + nlen + elen));

    std::string compressed(e.csize, '\0');
    in_.read(compressed.data(), static_cast<std::streamsize>(compressed.size()));
    if (!in_) throw FormatError("archive '" + path_ + "': truncated data for '" + name + "'");

    std::string data;
    if (e.method == 0) {
      data = std::move(compressed);
    } else if (e.method == 8) {
      data = inflate_raw(compressed, e.usize, name);
    } else {
      throw FormatError("archive '" + path_ + "': unsupported compression method " +
                        std::to_string(e.method) + " for '" + name + "'");
    }
    if (data.size() != e.usize) {
      throw FormatError("archive '" + path_ + "': size mismatch for '" + name + "'");
    }
    const auto crc = static_cast<std::uint32_t>(
        ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
    if (crc != e.crc) throw FormatError("archive '" + path_ + "': CRC mismatch for '" + name + "'");
    return data;
  }

 private:
  struct Entry {
    std::uint16_t method = 0;
    std::uint32_t crc = 0;
    std::uint64_t csize = 0;
    std::uint64_t usize = 0;
    std::uint64_t offset = 0;
  };

  void parse_directory() {
    using namespace zipdetail;
    in_.seekg(0, std::ios::end);
    const std::uint64_t file_size = static_cast<std::uint64_t>(in_.tellg());
    if (file_size < 22) throw FormatError("'" + path_ + "' is not a zip archive");

    // EOCD sits in the last 22..(22+64K) bytes.
    const std::uint64_t tail_len = std::min<std::uint64_t>(file_size, 22 + 65535);
    std::string tail(tail_len, '\0');
    in_.seekg(static_cast<std::streamoff>(file_size - tail_len));
    in_.read(tail.data(), static_cast<std::streamsize>(tail_len));
    std::ptrdiff_t eocd = -1;
    for (std::ptrdiff_t i = static_cast<std::ptrdiff_t>(tail_len) - 22; i >= 0; --i) {
      if (get32(tail.data() + i) == kEocdSig) {
        eocd = i;
        break;
      }
    }
    if (eocd < 0) throw FormatError("'" + path_ + "' is not a zip archive (no end record)");

    std::uint64_t n = get16(tail.data() + eocd + 10);
    std::uint64_t cd_size = get32(tail.data() + eocd + 12);
    std::uint64_t cd_offset = get32(tail.data() + eocd + 16);

    if (n == kMax16 || cd_size == kMax32 || cd_offset == kMax32) {
      // Locator directly precedes the EOCD.
      const std::uint64_t loc_pos = file_size - tail_len + static_cast<std::uint64_t>(eocd);
      if (loc_pos < 20) throw FormatError("'" + path_ + "': missing zip64 locator");
      char loc[20];
      in_.seekg(static_cast<std::streamoff>(loc_pos - 20));
      in_.read(loc, 20);
      if (!in_ || get32(loc) != kEocd64LocatorSig) {
        throw FormatError("'" + path_ + "': missing zip64 locator");
      }
      const std::uint64_t eocd64_pos = get64(loc + 8);
      char rec[56];
      in_.seekg(static_cast<std::streamoff>(eocd64_pos));
      in_.read(rec, 56);
      if (!in_ || get32(rec) != kEocd64Sig) throw FormatError("'" + path_ + "': bad zip64 end record");
      n = get64(rec + 32);
      cd_size = get64(rec + 40);
      cd_offset = get64(rec + 48);
    }

    std::string cd(cd_size, '\0');
    in_.seekg(static_cast<std::streamoff>(cd_offset));
    in_.read(cd.data(), static_cast<std::streamsize>(cd.size()));
    if (!in_) throw FormatError("'" + path_ + "': truncated central directory");

    std::size_t pos = 0;
    for (std::uint64_t i = 0; i < n; ++i) {
      if (pos + 46 > cd.size() || get32(cd.data() + pos) != kCentralSig) {
        throw FormatError("'" + path_ + "': corrupt central directory");
      }
      Entry e;
      e.method = get16(cd.data() + pos + 10);
      e.crc = get32(cd.data() + pos + 16);
      e.csize = get32(cd.data() + pos + 20);
      e.usize = get32(cd.data() + pos + 24);
      const std::uint16_t nlen = get16(cd.data() + pos + 28);
      const std::uint16_t elen = get16(cd.data() + pos + 30);
      const std::uint16_t clen = get16(cd.data() + pos + 32);
      e.offset = get32(cd.data() + pos + 42);
      if (pos + 46 + nlen + elen + clen > cd.size()) {
        throw FormatError("'" + path_ + "': corrupt central directory");
      }
      std::string name = cd.substr(pos + 46, nlen);

      // zip64 extra field: 64-bit values replace 0xFFFFFFFF markers in order.
      std::size_t xp = pos + 46 + nlen;
      const std::size_t xend = xp + elen;
      while (xp + 4 <= xend) {
        const std::uint16_t id = get16(cd.data() + xp);
        const std::uint16_t len = get16(cd.data() + xp + 2);
        if (id == 0x0001) {
          std::size_t fp = xp + 4;
          if (e.usize == kMax32 && fp + 8 <= xp + 4 + len) {
            e.usize = get64(cd.data() + fp);
            fp += 8;
          }
          if (e.csize == kMax32 && fp + 8 <= xp + 4 + len) {
            e.csize = get64(cd.data() + fp);
            fp += 8;
          }
          if (e.offset == kMax32 && fp + 8 <= xp + 4 + len) {
            e.offset = get64(cd.data() + fp);
            fp += 8;
          }
        }
        xp += 4 + len;
      }
      entries_.emplace(std::move(name), e);
      pos += 46u + nlen + elen + clen;
    }
  }

  std::string inflate_raw(const std::string& compressed, std::uint64_t expected,
                          const std::string& name) {
    std::string out(expected, '\0');
    z_stream zs{};
    if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) throw FormatError("inflateInit failed");
    zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(compressed.data()));
    zs.avail_in = static_cast<uInt>(compressed.size());
    zs.next_out = reinterpret_cast<Bytef*>(out.data());
    zs.avail_out = static_cast<uInt>(out.size());
    const int rc = inflate(&zs, Z_FINISH);
    inflateEnd(&zs);
    if (rc != Z_STREAM_END) {
      throw FormatError("archive '" + path_ + "': inflate failed for '" + name + "'");
    }
    out.resize(out.size() - zs.avail_out);
    return out;
  }

  std::string path_;
  std::ifstream in_;
  std::map<std::string, Entry> entries_;
};

}  // namespace avmc
