// Copyright 2026 The dlspec Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "dlspec/archive.hpp"

#include <sys/stat.h>
#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dlspec/error.hpp"

namespace dlspec {

namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const fs::path& archive, const std::string& why) {
  throw Error(Errc::unpack_failed, archive.string() + ": " + why);
}

// Maps an entry name onto a path relative to the destination. Returns an
// empty path for entries that name the root itself.
fs::path safe_relative(const fs::path& archive, const std::string& name) {
  if (name.empty()) return {};
  const fs::path p(name);
  if (p.is_absolute() || name.front() == '/') {
    fail(archive, "absolute entry path '" + name + "'");
  }
  fs::path out;
  for (const auto& part : p) {
    const std::string s = part.string();
    if (s.empty() || s == ".") continue;
    if (s == "..") fail(archive, "entry '" + name + "' escapes the destination");
    out /= part;
  }
  return out;
}

class Extractor {
 public:
  Extractor(fs::path archive, fs::path dest)
      : archive_(std::move(archive)), dest_(std::move(dest)) {
    std::error_code ec;
    fs::create_directories(dest_, ec);
    if (ec) fail(archive_, "cannot create " + dest_.string() + ": " + ec.message());
  }

  std::size_t files() const noexcept { return files_; }

  void directory(const fs::path& rel) {
    if (rel.empty()) return;
    check_parents(rel);
    std::error_code ec;
    fs::create_directories(dest_ / rel, ec);
    if (ec) fail(archive_, "cannot create directory " + rel.string());
  }

  std::ofstream open_file(const fs::path& rel) {
    if (rel.empty()) fail(archive_, "file entry without a name");
    check_parents(rel);
    if (rel.has_parent_path()) directory(rel.parent_path());
    const fs::path target = dest_ / rel;
    std::error_code ec;
    if (fs::is_symlink(fs::symlink_status(target, ec))) fs::remove(target, ec);
    std::ofstream out(target, std::ios::binary | std::ios::trunc);
    if (!out) fail(archive_, "cannot write " + rel.string());
    ++files_;
    return out;
  }

  void symlink(const fs::path& rel, const std::string& target) {
    if (rel.empty()) fail(archive_, "link entry without a name");
    const fs::path t(target);
    if (target.empty() || t.is_absolute()) {
      fail(archive_, "link '" + rel.string() + "' has an absolute target");
    }
    // Resolve lexically from the link's own directory.
    int depth = 0;
    for (const auto& part : rel.parent_path()) {
      if (!part.empty() && part != ".") ++depth;
    }
    for (const auto& part : t) {
      const std::string s = part.string();
      if (s.empty() || s == ".") continue;
      depth += s == ".." ? -1 : 1;
      if (depth < 0) {
        fail(archive_, "link '" + rel.string() + "' points outside the destination");
      }
    }
    check_parents(rel);
    if (rel.has_parent_path()) directory(rel.parent_path());
    std::error_code ec;
    fs::remove(dest_ / rel, ec);
    fs::create_symlink(t, dest_ / rel, ec);
    if (ec) fail(archive_, "cannot create link " + rel.string());
  }

  void hardlink(const fs::path& rel, const fs::path& source_rel) {
    if (rel.empty() || source_rel.empty()) fail(archive_, "hard link without a name");
    check_parents(source_rel);
    const fs::path source = dest_ / source_rel;
    if (!fs::is_regular_file(fs::symlink_status(source))) {
      fail(archive_, "hard link '" + rel.string() + "' refers to a missing entry");
    }
    check_parents(rel);
    if (rel.has_parent_path()) directory(rel.parent_path());
    std::error_code ec;
    fs::remove(dest_ / rel, ec);
    fs::copy_file(source, dest_ / rel, ec);
    if (ec) fail(archive_, "cannot copy " + source_rel.string());
    ++files_;
  }

  void set_executable(const fs::path& rel, bool executable) {
    if (!executable) return;
    std::error_code ec;
    fs::permissions(dest_ / rel,
                    fs::perms::owner_exec | fs::perms::group_exec |
                        fs::perms::others_exec,
                    fs::perm_options::add, ec);
  }

 private:
  // Refuses to write through a link created by an earlier entry.
  void check_parents(const fs::path& rel) {
    fs::path cur = dest_;
    for (const auto& part : rel.parent_path()) {
      cur /= part;
      std::error_code ec;
      if (fs::is_symlink(fs::symlink_status(cur, ec))) {
        fail(archive_, "entry '" + rel.string() + "' is written through a link");
      }
    }
  }

  fs::path archive_;
  fs::path dest_;
  std::size_t files_ = 0;
};

// --- tar ------------------------------------------------------------------

class GzReader {
 public:
  explicit GzReader(const fs::path& p) : file_(gzopen(p.c_str(), "rb")) {
    if (!file_) fail(p, "cannot open");
  }
  ~GzReader() {
    if (file_) gzclose(file_);
  }
  GzReader(const GzReader&) = delete;
  GzReader& operator=(const GzReader&) = delete;

  // Returns the number of bytes read; throws on a corrupt stream.
  std::size_t read(char* buf, std::size_t n, const fs::path& p) {
    std::size_t total = 0;
    while (total < n) {
      const int got = gzread(file_, buf + total, static_cast<unsigned>(n - total));
      if (got < 0) {
        int errnum = 0;
        fail(p, std::string("decompression error: ") + gzerror(file_, &errnum));
      }
      if (got == 0) break;
      total += static_cast<std::size_t>(got);
    }
    return total;
  }

 private:
  gzFile file_;
};

std::uint64_t tar_number(const char* field, std::size_t len, const fs::path& p) {
  const auto first = static_cast<unsigned char>(field[0]);
  if (first & 0x80) {
    // base-256
    std::uint64_t v = first & 0x7f;
    for (std::size_t i = 1; i < len; ++i) {
      v = (v << 8) | static_cast<unsigned char>(field[i]);
    }
    return v;
  }
  std::uint64_t v = 0;
  std::size_t i = 0;
  while (i < len && (field[i] == ' ' || field[i] == '\0')) ++i;
  for (; i < len && field[i] >= '0' && field[i] <= '7'; ++i) {
    v = v * 8 + static_cast<std::uint64_t>(field[i] - '0');
  }
  for (; i < len; ++i) {
    if (field[i] != ' ' && field[i] != '\0') fail(p, "bad numeric header field");
  }
  return v;
}

std::string tar_string(const char* field, std::size_t len) {
  return std::string(field, strnlen(field, len));
}

std::map<std::string, std::string> parse_pax(const std::string& data,
                                             const fs::path& p) {
  std::map<std::string, std::string> out;
  std::size_t pos = 0;
  while (pos < data.size()) {
    const auto space = data.find(' ', pos);
    if (space == std::string::npos) fail(p, "bad pax record");
    const std::size_t len = std::stoul(data.substr(pos, space - pos));
    if (len == 0 || pos + len > data.size()) fail(p, "bad pax record length");
    const std::string rec = data.substr(space + 1, pos + len - space - 2);
    const auto eq = rec.find('=');
    if (eq != std::string::npos) out[rec.substr(0, eq)] = rec.substr(eq + 1);
    pos += len;
  }
  return out;
}

std::size_t unpack_tar(const fs::path& archive, bool gzip, const fs::path& dest) {
  if (gzip) {
    std::ifstream in(archive, std::ios::binary);
    unsigned char magic[2] = {0, 0};
    in.read(reinterpret_cast<char*>(magic), 2);
    if (in.gcount() != 2 || magic[0] != 0x1f || magic[1] != 0x8b) {
      fail(archive, "not a gzip stream");
    }
  }
  GzReader reader(archive);
  Extractor ex(archive, dest);
  std::array<char, 512> block{};
  std::optional<std::string> long_name, long_link;
  std::map<std::string, std::string> pax;
  bool saw_end = false;

  auto read_data = [&](std::uint64_t size) {
    std::string data(size, '\0');
    if (reader.read(data.data(), size, archive) != size) fail(archive, "truncated entry");
    const std::uint64_t pad = (512 - size % 512) % 512;
    std::array<char, 512> skip{};
    if (reader.read(skip.data(), pad, archive) != pad) fail(archive, "truncated entry");
    return data;
  };

  while (true) {
    const std::size_t got = reader.read(block.data(), block.size(), archive);
    if (got == 0) break;
    if (got != block.size()) fail(archive, "truncated header");
    if (std::all_of(block.begin(), block.end(), [](char c) { return c == '\0'; })) {
      saw_end = true;
      break;
    }
    const std::uint64_t stored = tar_number(&block[148], 8, archive);
    std::uint64_t sum = 0;
    for (std::size_t i = 0; i < block.size(); ++i) {
      sum += (i >= 148 && i < 156) ? ' ' : static_cast<unsigned char>(block[i]);
    }
    if (sum != stored) fail(archive, "header checksum mismatch");

    std::uint64_t size = tar_number(&block[124], 12, archive);
    const char type = block[156];
    std::string name = tar_string(&block[0], 100);
    if (std::memcmp(&block[257], "ustar", 5) == 0) {
      const std::string prefix = tar_string(&block[345], 155);
      if (!prefix.empty()) name = prefix + "/" + name;
    }
    std::string link = tar_string(&block[157], 100);
    const bool executable = (tar_number(&block[100], 8, archive) & 0111) != 0;

    if (type == 'L' || type == 'K') {
      std::string data = read_data(size);
      data.resize(strnlen(data.c_str(), data.size()));
      (type == 'L' ? long_name : long_link) = data;
      continue;
    }
    if (type == 'x') {
      pax = parse_pax(read_data(size), archive);
      continue;
    }
    if (type == 'g') {
      read_data(size);
      continue;
    }
    if (long_name) name = *long_name;
    if (long_link) link = *long_link;
    if (auto it = pax.find("path"); it != pax.end()) name = it->second;
    if (auto it = pax.find("linkpath"); it != pax.end()) link = it->second;
    if (auto it = pax.find("size"); it != pax.end()) size = std::stoull(it->second);
    long_name.reset();
    long_link.reset();
    pax.clear();

    const fs::path rel = safe_relative(archive, name);
    switch (type) {
      case '0':
      case '\0':
      case '7': {
        std::ofstream out = ex.open_file(rel);
        std::array<char, 1 << 15> buf{};
        std::uint64_t left = size;
        while (left > 0) {
          const std::size_t n = static_cast<std::size_t>(
              std::min<std::uint64_t>(left, buf.size()));
          if (reader.read(buf.data(), n, archive) != n) fail(archive, "truncated entry");
          out.write(buf.data(), static_cast<std::streamsize>(n));
          left -= n;
        }
        out.close();
        if (!out) fail(archive, "cannot write " + rel.string());
        ex.set_executable(rel, executable);
        const std::uint64_t pad = (512 - size % 512) % 512;
        std::array<char, 512> skip{};
        if (reader.read(skip.data(), pad, archive) != pad) fail(archive, "truncated entry");
        break;
      }
      case '5':
        ex.directory(rel);
        read_data(size);
        break;
      case '2':
        ex.symlink(rel, link);
        read_data(size);
        break;
      case '1':
        ex.hardlink(rel, safe_relative(archive, link));
        read_data(size);
        break;
      default:
        // Devices, fifos and unknown types carry no dataset content.
        read_data(size);
        break;
    }
  }
  if (!saw_end && ex.files() == 0) fail(archive, "empty or unrecognised tar stream");
  return ex.files();
}

// --- zip ------------------------------------------------------------------

std::uint32_t le32(const unsigned char* p) {
  return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::string inflate_raw(const unsigned char* data, std::size_t size,
                        std::size_t expected, const fs::path& archive) {
  std::string out(expected, '\0');
  z_stream zs{};
  if (inflateInit2(&zs, -MAX_WBITS) != Z_OK) fail(archive, "inflate init failed");
  zs.next_in = const_cast<Bytef*>(data);
  zs.avail_in = static_cast<uInt>(size);
  zs.next_out = reinterpret_cast<Bytef*>(out.data());
  zs.avail_out = static_cast<uInt>(out.size());
  const int rc = inflate(&zs, Z_FINISH);
  const std::size_t produced = zs.total_out;
  inflateEnd(&zs);
  if (rc != Z_STREAM_END || produced != expected) fail(archive, "corrupt deflate data");
  return out;
}

std::size_t unpack_zip(const fs::path& archive, const fs::path& dest) {
  std::ifstream in(archive, std::ios::binary);
  if (!in) fail(archive, "cannot open");
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  const auto* base = reinterpret_cast<const unsigned char*>(bytes.data());
  const std::size_t n = bytes.size();
  if (n < 22) fail(archive, "not a zip archive");

  std::size_t eocd = std::string::npos;
  const std::size_t lowest = n > 22 + 65535 ? n - 22 - 65535 : 0;
  for (std::size_t i = n - 22 + 1; i-- > lowest;) {
    if (le32(base + i) == 0x06054b50) {
      eocd = i;
      break;
    }
  }
  if (eocd == std::string::npos) fail(archive, "not a zip archive");
  const std::uint16_t count = le16(base + eocd + 10);
  const std::uint32_t cd_size = le32(base + eocd + 12);
  const std::uint32_t cd_offset = le32(base + eocd + 16);
  if (cd_offset == 0xffffffffu || count == 0xffff) fail(archive, "zip64 is not supported");
  if (static_cast<std::uint64_t>(cd_offset) + cd_size > eocd) {
    fail(archive, "central directory out of range");
  }

  Extractor ex(archive, dest);
  std::size_t pos = cd_offset;
  for (std::uint16_t e = 0; e < count; ++e) {
    if (pos + 46 > eocd || le32(base + pos) != 0x02014b50) {
      fail(archive, "bad central directory entry");
    }
    const unsigned char* h = base + pos;
    const std::uint16_t flags = le16(h + 8);
    const std::uint16_t method = le16(h + 10);
    const std::uint32_t crc = le32(h + 16);
    const std::uint32_t csize = le32(h + 20);
    const std::uint32_t usize = le32(h + 24);
    const std::uint16_t name_len = le16(h + 28);
    const std::uint16_t extra_len = le16(h + 30);
    const std::uint16_t comment_len = le16(h + 32);
    const std::uint32_t attrs = le32(h + 38);
    const std::uint32_t local = le32(h + 42);
    if (pos + 46 + name_len > eocd) fail(archive, "bad central directory entry");
    const std::string name(reinterpret_cast<const char*>(h + 46), name_len);
    pos += 46u + name_len + extra_len + comment_len;

    if (flags & 0x1) fail(archive, "encrypted entries are not supported");
    if (csize == 0xffffffffu || usize == 0xffffffffu) fail(archive, "zip64 is not supported");
    if (static_cast<std::uint64_t>(local) + 30 > n || le32(base + local) != 0x04034b50) {
      fail(archive, "bad local header for '" + name + "'");
    }
    const std::size_t data_at =
        local + 30u + le16(base + local + 26) + le16(base + local + 28);
    if (data_at + csize > n) fail(archive, "entry '" + name + "' out of range");

    const fs::path rel = safe_relative(archive, name);
    if (!name.empty() && name.back() == '/') {
      ex.directory(rel);
      continue;
    }
    std::string content;
    if (method == 0) {
      if (csize != usize) fail(archive, "stored entry size mismatch");
      content.assign(reinterpret_cast<const char*>(base + data_at), csize);
    } else if (method == 8) {
      content = inflate_raw(base + data_at, csize, usize, archive);
    } else {
      fail(archive, "unsupported compression method " + std::to_string(method));
    }
    const auto actual = crc32(0L, reinterpret_cast<const Bytef*>(content.data()),
                              static_cast<uInt>(content.size()));
    if (actual != crc) fail(archive, "CRC mismatch for '" + name + "'");

    const std::uint32_t mode = attrs >> 16;
    if ((le16(h + 4) >> 8) == 3 && S_ISLNK(mode)) {  // made by unix
      ex.symlink(rel, content);
      continue;
    }
    std::ofstream out = ex.open_file(rel);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.close();
    if (!out) fail(archive, "cannot write " + rel.string());
    ex.set_executable(rel, (le16(h + 4) >> 8) == 3 && (mode & 0111) != 0);
  }
  return ex.files();
}

}  // namespace

std::size_t unpack_archive(const fs::path& archive, Unpack kind, const fs::path& dest) {
  switch (kind) {
    case Unpack::none:
      fail(archive, "resource is not an archive");
    case Unpack::tar:
      return unpack_tar(archive, false, dest);
    case Unpack::tar_gz:
      return unpack_tar(archive, true, dest);
    case Unpack::zip:
      return unpack_zip(archive, dest);
  }
  fail(archive, "unknown archive kind");
}

}  // namespace dlspec
