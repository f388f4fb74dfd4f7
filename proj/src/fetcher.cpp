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

#include "dlspec/fetcher.hpp"

#include <curl/curl.h>
#include <fnmatch.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <thread>

#include <nlohmann/json.hpp>

#include "dlspec/archive.hpp"
#include "dlspec/digest.hpp"
#include "file_lock.hpp"

namespace dlspec {

namespace {

void curl_init_once() {
  static std::once_flag once;
  std::call_once(once, [] { curl_global_init(CURL_GLOBAL_DEFAULT); });
}

std::size_t write_to_file(char* ptr, std::size_t size, std::size_t nmemb, void* user) {
  return std::fwrite(ptr, size, nmemb, static_cast<std::FILE*>(user));
}

void curl_download(const std::string& url, const fs::path& dest, long max_redirects) {
  curl_init_once();
  std::FILE* out = std::fopen(dest.c_str(), "wb");
  if (!out) throw Error(Errc::io, "cannot write " + dest.string());
  CURL* curl = curl_easy_init();
  if (!curl) {
    std::fclose(out);
    throw Error(Errc::io, "cannot initialise libcurl");
  }
  char errbuf[CURL_ERROR_SIZE] = {0};
  const long protocols = CURLPROTO_HTTP | CURLPROTO_HTTPS | CURLPROTO_FTP;
  curl_easy_setopt(curl, CURLOPT_URL, url.c_str());
  curl_easy_setopt(curl, CURLOPT_PROTOCOLS, protocols);
  curl_easy_setopt(curl, CURLOPT_REDIR_PROTOCOLS, protocols);
  curl_easy_setopt(curl, CURLOPT_FOLLOWLOCATION, 1L);
  curl_easy_setopt(curl, CURLOPT_MAXREDIRS, max_redirects);
  curl_easy_setopt(curl, CURLOPT_FAILONERROR, 1L);
  curl_easy_setopt(curl, CURLOPT_CONNECTTIMEOUT, 30L);
  curl_easy_setopt(curl, CURLOPT_LOW_SPEED_LIMIT, 1L);
  curl_easy_setopt(curl, CURLOPT_LOW_SPEED_TIME, 60L);
  curl_easy_setopt(curl, CURLOPT_NOSIGNAL, 1L);
  curl_easy_setopt(curl, CURLOPT_WRITEFUNCTION, write_to_file);
  curl_easy_setopt(curl, CURLOPT_WRITEDATA, out);
  curl_easy_setopt(curl, CURLOPT_ERRORBUFFER, errbuf);
  const CURLcode rc = curl_easy_perform(curl);
  curl_easy_cleanup(curl);
  const bool closed = std::fclose(out) == 0;
  if (rc == CURLE_UNSUPPORTED_PROTOCOL) {
    throw Error(Errc::unsupported_scheme, url + ": " + curl_easy_strerror(rc));
  }
  if (rc != CURLE_OK) {
    throw Error(Errc::unreachable,
                url + ": " + (errbuf[0] ? errbuf : curl_easy_strerror(rc)));
  }
  if (!closed) throw Error(Errc::io, "cannot write " + dest.string());
}

bool is_fetchable_scheme(const std::string& scheme) {
  return scheme == "http" || scheme == "https" || scheme == "ftp" || scheme == "file";
}

void remove_quietly(const fs::path& p) {
  std::error_code ec;
  fs::remove_all(p, ec);
}

bool glob_segments(const std::vector<std::string>& pat, std::size_t pi,
                   const std::vector<std::string>& path, std::size_t si) {
  if (pi == pat.size()) return si == path.size();
  if (pat[pi] == "**") {
    for (std::size_t k = si; k <= path.size(); ++k) {
      if (glob_segments(pat, pi + 1, path, k)) return true;
    }
    return false;
  }
  if (si == path.size()) return false;
  if (fnmatch(pat[pi].c_str(), path[si].c_str(), FNM_PERIOD) != 0) return false;
  return glob_segments(pat, pi + 1, path, si + 1);
}

std::vector<std::string> split_segments(std::string_view s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    const auto slash = s.find('/', start);
    const auto part = s.substr(start, slash == std::string_view::npos ? std::string_view::npos
                                                                      : slash - start);
    if (!part.empty()) out.emplace_back(part);
    if (slash == std::string_view::npos) break;
    start = slash + 1;
  }
  return out;
}

}  // namespace

fs::path file_url_path(const std::string& url) {
  std::string_view rest(url);
  if (rest.rfind("file://", 0) != 0) {
    throw Error(Errc::unsupported_scheme, "'" + url + "' is not a file URL");
  }
  rest.remove_prefix(7);
  if (rest.rfind("localhost/", 0) == 0) rest.remove_prefix(9);
  if (rest.empty() || rest.front() != '/') {
    throw Error(Errc::unreachable, "'" + url + "' is not an absolute file URL");
  }
  // Percent-decoding of the common escapes.
  std::string out;
  for (std::size_t i = 0; i < rest.size(); ++i) {
    if (rest[i] == '%' && i + 2 < rest.size()) {
      const std::string hex(rest.substr(i + 1, 2));
      char* end = nullptr;
      const long v = std::strtol(hex.c_str(), &end, 16);
      if (end == hex.c_str() + 2) {
        out += static_cast<char>(v);
        i += 2;
        continue;
      }
    }
    out += rest[i];
  }
  return out;
}

void DefaultTransport::download(const std::string& url, const fs::path& dest) {
  const std::string scheme = url_scheme(url);
  if (scheme == "file") {
    const fs::path src = file_url_path(url);
    std::error_code ec;
    if (!fs::is_regular_file(src, ec)) {
      throw Error(Errc::unreachable, url + ": no such file");
    }
    fs::copy_file(src, dest, fs::copy_options::overwrite_existing, ec);
    if (ec) throw Error(Errc::unreachable, url + ": " + ec.message());
    return;
  }
  if (scheme == "http" || scheme == "https" || scheme == "ftp") {
    curl_download(url, dest, max_redirects_);
    return;
  }
  throw Error(Errc::unsupported_scheme, "unsupported URL scheme in '" + url + "'");
}

bool verify(const fs::path& path, const Checksum& checksum) {
  if (checksum.algorithm != "sha256") {
    throw Error(Errc::malformed, "unsupported checksum algorithm " + checksum.algorithm);
  }
  return sha256_file(path) == checksum.digest;
}

ResourceFetcher::ResourceFetcher(fs::path cache_root, Counters* counters,
                                 std::shared_ptr<Transport> transport)
    : root_(std::move(cache_root)),
      counters_(counters ? counters : &own_counters_),
      transport_(transport ? std::move(transport) : std::make_shared<DefaultTransport>()) {}

fs::path ResourceFetcher::entry_path(const Checksum& checksum) const {
  return root_ / checksum.algorithm / checksum.digest.substr(0, 2) / checksum.digest;
}

fs::path ResourceFetcher::unpacked_path(const Checksum& checksum) const {
  fs::path p = entry_path(checksum);
  p += ".unpacked";
  return p;
}

std::optional<CacheEntry> ResourceFetcher::lookup(const Checksum& checksum) {
  const fs::path path = entry_path(checksum);
  std::error_code ec;
  if (!fs::is_regular_file(path, ec)) return std::nullopt;
  if (!verify(path, checksum)) {
    remove_quietly(path);
    remove_quietly(unpacked_path(checksum));
    remove_quietly(fs::path(path.string() + ".json"));
    counters_->evictions++;
    return std::nullopt;
  }
  CacheEntry entry{checksum, path, fs::file_size(path, ec), {}, {}};
  std::ifstream meta(path.string() + ".json");
  if (meta) {
    try {
      const auto j = nlohmann::json::parse(meta);
      entry.fetched_at = j.value("fetched_at", "");
      entry.url = j.value("url", "");
    } catch (const nlohmann::json::exception&) {
    }
  }
  return entry;
}

fs::path ResourceFetcher::fetch(const ResourceRef& ref) {
  counters_->fetch_requests++;
  const std::string scheme = url_scheme(ref.url);
  if (!is_fetchable_scheme(scheme)) {
    throw Error(Errc::unsupported_scheme, "unsupported URL scheme in '" + ref.url + "'");
  }
  const fs::path final_path = entry_path(ref.checksum);
  std::error_code ec;
  fs::create_directories(final_path.parent_path(), ec);
  if (ec) throw Error(Errc::io, "cannot create cache directory: " + ec.message());
  detail::FileLock lock(final_path.string() + ".lock");

  if (lookup(ref.checksum)) {
    counters_->cache_hits++;
  } else {
    const fs::path tmp = final_path.string() + ".part-" + detail::random_suffix();
    counters_->transfers++;
    try {
      transport_->download(ref.url, tmp);
    } catch (...) {
      remove_quietly(tmp);
      throw;
    }
    const std::string actual = sha256_file(tmp);
    if (actual != ref.checksum.digest) {
      remove_quietly(tmp);
      throw Error(Errc::checksum_mismatch, ref.url + ": expected sha256:" +
                                               ref.checksum.digest + ", got sha256:" + actual);
    }
    fs::rename(tmp, final_path, ec);
    if (ec) {
      remove_quietly(tmp);
      throw Error(Errc::io, "cannot move download into the cache: " + ec.message());
    }
    const nlohmann::json meta = {{"url", ref.url},
                                 {"fetched_at", utc_timestamp_now()},
                                 {"size", fs::file_size(final_path, ec)}};
    try {
      detail::write_atomically(final_path.string() + ".json", meta.dump(2) + "\n");
    } catch (const Error&) {
      // The sidecar is informational only.
    }
  }

  if (ref.unpack == Unpack::none) return final_path;
  const fs::path unpacked = unpacked_path(ref.checksum);
  if (fs::is_directory(unpacked, ec)) return unpacked;
  const fs::path tmp_dir = unpacked.string() + "-" + detail::random_suffix();
  try {
    unpack_archive(final_path, ref.unpack, tmp_dir);
  } catch (...) {
    remove_quietly(tmp_dir);
    throw;
  }
  fs::rename(tmp_dir, unpacked, ec);
  if (ec) {
    remove_quietly(tmp_dir);
    throw Error(Errc::io, "cannot move unpacked tree into the cache: " + ec.message());
  }
  return unpacked;
}

std::vector<fs::path> ResourceFetcher::fetch_all(std::span<const ResourceRef> refs,
                                                 unsigned parallelism) {
  if (parallelism == 0) throw Error(Errc::malformed, "parallelism must be at least 1");
  std::vector<fs::path> paths(refs.size());
  std::vector<std::exception_ptr> errors(refs.size());
  std::atomic<std::size_t> next{0};
  std::atomic<std::size_t> first_failed{refs.size()};

  auto worker = [&] {
    while (true) {
      const std::size_t i = next++;
      if (i >= refs.size()) return;
      if (i > first_failed.load()) continue;
      try {
        paths[i] = fetch(refs[i]);
      } catch (...) {
        errors[i] = std::current_exception();
        std::size_t cur = first_failed.load();
        while (i < cur && !first_failed.compare_exchange_weak(cur, i)) {
        }
      }
    }
  };
  const unsigned n = std::min<unsigned>(parallelism, static_cast<unsigned>(refs.size()));
  std::vector<std::thread> threads;
  for (unsigned t = 1; t < n; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error& e) {
      throw FetchError(e.code(), i, "resource[" + std::to_string(i) + "]: " + e.what());
    } catch (const std::exception& e) {
      throw FetchError(Errc::io, i, "resource[" + std::to_string(i) + "]: " + e.what());
    }
  }
  return paths;
}

bool glob_match(std::string_view pattern, std::string_view path) {
  return glob_segments(split_segments(pattern), 0, split_segments(path), 0);
}

std::string url_basename(const std::string& url) {
  std::string_view s(url);
  if (auto q = s.find_first_of("?#"); q != std::string_view::npos) s = s.substr(0, q);
  while (!s.empty() && s.back() == '/') s.remove_suffix(1);
  const auto slash = s.rfind('/');
  return std::string(slash == std::string_view::npos ? s : s.substr(slash + 1));
}

std::vector<Element> list_elements(std::span<const fs::path> roots,
                                   std::span<const std::string> names,
                                   const std::string& glob) {
  std::vector<Element> out;
  for (std::size_t i = 0; i < roots.size(); ++i) {
    const fs::path& root = roots[i];
    std::error_code ec;
    if (fs::is_directory(root, ec)) {
      for (auto it = fs::recursive_directory_iterator(root, ec);
           !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (!it->is_regular_file(ec)) continue;
        const std::string rel = fs::relative(it->path(), root, ec).generic_string();
        if (glob_match(glob, rel)) out.push_back({rel, it->path()});
      }
    } else {
      const std::string rel = i < names.size() ? names[i] : root.filename().string();
      if (glob_match(glob, rel)) out.push_back({rel, root});
    }
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const Element& a, const Element& b) { return a.relative < b.relative; });
  return out;
}

}  // namespace dlspec
