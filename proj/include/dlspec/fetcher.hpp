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

#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlspec/counters.hpp"
#include "dlspec/error.hpp"
#include "dlspec/manifest.hpp"

namespace dlspec {

namespace fs = std::filesystem;

/// Moves the bytes behind a URL into a local file.
class Transport {
 public:
  virtual ~Transport() = default;
  /// Throws Error(unreachable) or Error(unsupported_scheme).
  virtual void download(const std::string& url, const fs::path& dest) = 0;
};

/// http, https and ftp through libcurl; file:// by copying.
class DefaultTransport : public Transport {
 public:
  explicit DefaultTransport(long max_redirects = 10) : max_redirects_(max_redirects) {}
  void download(const std::string& url, const fs::path& dest) override;

 private:
  long max_redirects_;
};

/// Local path of a file:// URL (`file:///abs` or `file://localhost/abs`).
fs::path file_url_path(const std::string& url);

bool verify(const fs::path& path, const Checksum& checksum);

struct CacheEntry {
  Checksum checksum;
  fs::path path;
  std::uintmax_t size = 0;
  std::string fetched_at;
  std::string url;
};

/// Error from fetch_all, carrying the failing resource's input index.
class FetchError : public Error {
 public:
  FetchError(Errc code, std::size_t index, const std::string& message)
      : Error(code, message), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class ResourceFetcher {
 public:
  explicit ResourceFetcher(fs::path cache_root, Counters* counters = nullptr,
                           std::shared_ptr<Transport> transport = nullptr);

  const fs::path& cache_root() const noexcept { return root_; }

  /// `<cache>/sha256/<first2>/<digest>`
  fs::path entry_path(const Checksum& checksum) const;
  fs::path unpacked_path(const Checksum& checksum) const;

  /// Verified entry for a checksum, evicting it when the bytes are corrupt.
  std::optional<CacheEntry> lookup(const Checksum& checksum);

  /// Local file, or the unpacked directory for archives.
  ///
  /// Throws Error(checksum_mismatch | unreachable | unsupported_scheme |
  /// unpack_failed | io).
  fs::path fetch(const ResourceRef& ref);

  /// Paths in input order. The first failure by input order is rethrown as a
  /// FetchError after every transfer has settled.
  std::vector<fs::path> fetch_all(std::span<const ResourceRef> refs,
                                  unsigned parallelism = 4);

 private:
  fs::path root_;
  Counters* counters_;
  Counters own_counters_;
  std::shared_ptr<Transport> transport_;
};

/// Element listing: the files under `roots` whose relative path matches
/// `glob`, sorted by relative path. A root that is a regular file
/// contributes itself under `names[i]` (its URL basename).
struct Element {
  std::string relative;
  fs::path path;
};

std::vector<Element> list_elements(std::span<const fs::path> roots,
                                   std::span<const std::string> names,
                                   const std::string& glob);

/// `*`, `?` and `[...]` within one segment; `**` spans any number of
/// segments, including none.
bool glob_match(std::string_view pattern, std::string_view path);

/// Last path segment of a URL, ignoring query and fragment.
std::string url_basename(const std::string& url);

}  // namespace dlspec
