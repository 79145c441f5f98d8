#pragma once

// Shared plumbing for the suites: scratch directories, file slurps, and
// subprocess runs of the bundled CLI.

#include <sys/wait.h>
#include <unistd.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace testutil {

// Scratch directory under the system temp root, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    const auto base = std::filesystem::temp_directory_path();
    for (int k = 0;; ++k) {
      auto candidate = base / (tag + "_" + std::to_string(::getpid()) + "_" +
                               std::to_string(k));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
      if (k > 1000) throw std::runtime_error("cannot create scratch dir");
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::string str(const std::string& rel = "") const {
    return rel.empty() ? path_.string() : (path_ / rel).string();
  }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

inline void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
}

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

// Run a shell command, capturing combined output. exit_code -1 means the
// command did not terminate normally.
inline RunResult run_cmd(const std::string& cmd) {
  static int counter = 0;
  const std::string capture =
      (std::filesystem::temp_directory_path() /
       ("cmd_out_" + std::to_string(::getpid()) + "_" +
        std::to_string(counter++)))
          .string();
  const int status = std::system(("{ " + cmd + " ; } > " + capture + " 2>&1").c_str());
  RunResult r;
  if (status != -1 && WIFEXITED(status)) r.exit_code = WEXITSTATUS(status);
  std::ifstream in(capture, std::ios::binary);
  if (in) {
    std::ostringstream out;
    out << in.rdbuf();
    r.output = out.str();
  }
  std::error_code ec;
  std::filesystem::remove(capture, ec);
  return r;
}

// Shell-quote a single argument.
inline std::string shq(const std::string& s) {
  std::string out = "'";
  for (char c : s)
    if (c == '\'')
      out += "'\\''";
    else
      out += c;
  return out + "'";
}

// Path of the CLI binary under test, injected by the build.
inline std::string cli_path() {
#ifdef ADVIG_CLI_PATH
  return ADVIG_CLI_PATH;
#else
  const char* p = std::getenv("ADVIG_CLI_PATH");
  if (!p || !*p)
    throw std::runtime_error("ADVIG_CLI_PATH is not set; rebuild via cmake");
  return p;
#endif
}

// run_manifest.json differs between identical runs only in its start-time
// line; drop that line before comparing.
inline std::string without_start_time(const std::string& text) {
  std::istringstream in(text);
  std::string out, line;
  while (std::getline(in, line))
    if (line.find("\"started_at\"") == std::string::npos) out += line + "\n";
  return out;
}

// Byte-compare two run directories, timestamps excluded. Returns an empty
// string on equality, else a description of the first difference.
inline std::string diff_run_dirs(const std::string& a, const std::string& b) {
  namespace fs = std::filesystem;
  std::set<std::string> rels;
  for (const std::string& root : {a, b})
    for (const auto& e : fs::recursive_directory_iterator(root))
      if (e.is_regular_file())
        rels.insert(fs::relative(e.path(), root).string());
  for (const std::string& rel : rels) {
    const fs::path pa = fs::path(a) / rel, pb = fs::path(b) / rel;
    if (!fs::exists(pa)) return rel + " only in " + b;
    if (!fs::exists(pb)) return rel + " only in " + a;
    std::string ca = slurp(pa.string()), cb = slurp(pb.string());
    if (rel == "run_manifest.json") {
      ca = without_start_time(ca);
      cb = without_start_time(cb);
    }
    if (ca != cb) return rel + " differs";
  }
  return "";
}

}  // namespace testutil
