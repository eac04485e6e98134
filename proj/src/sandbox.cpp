#include "f2c/sandbox.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/resource.h>
#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cerrno>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <thread>

#include "f2c/error.hpp"
#include "text_util.hpp"

namespace f2c {

namespace fs = std::filesystem;

std::string_view to_string(ToolKind kind) {
  switch (kind) {
    case ToolKind::CompileFortran: return "CompileFortran";
    case ToolKind::CompileCpp: return "CompileCpp";
    case ToolKind::Execute: return "Execute";
  }
  return "Execute";
}

nlohmann::ordered_json to_json(const ToolOutcome& outcome, bool include_timing) {
  nlohmann::ordered_json j;
  j["kind"] = to_string(outcome.kind);
  j["command_line"] = outcome.command_line;
  j["exit_code"] = outcome.exit_code ? nlohmann::ordered_json(*outcome.exit_code) : nlohmann::ordered_json(nullptr);
  j["timed_out"] = outcome.timed_out;
  j["stdout"] = outcome.stdout_text;
  j["stderr"] = outcome.stderr_text;
  if (include_timing) j["wall_time_ms"] = outcome.wall_time_ms;
  return j;
}

ToolOutcome tool_outcome_from_json(const nlohmann::json& j) {
  ToolOutcome o;
  const auto kind = j.at("kind").get<std::string>();
  o.kind = kind == "CompileFortran" ? ToolKind::CompileFortran
           : kind == "CompileCpp"   ? ToolKind::CompileCpp
                                    : ToolKind::Execute;
  o.command_line = j.value("command_line", "");
  if (j.contains("exit_code") && !j["exit_code"].is_null()) o.exit_code = j["exit_code"].get<int>();
  o.timed_out = j.value("timed_out", false);
  o.stdout_text = j.value("stdout", "");
  o.stderr_text = j.value("stderr", "");
  o.wall_time_ms = j.value("wall_time_ms", std::int64_t{0});
  return o;
}

// ---------------------------------------------------------------------------
// Workspace

Workspace Workspace::create(const fs::path& scratch_root) {
  fs::create_directories(scratch_root);
  std::string pattern = (scratch_root / (std::string(kWorkspacePrefix) + "XXXXXX")).string();
  if (::mkdtemp(pattern.data()) == nullptr) {
    throw Error(ErrorCode::Io, "mkdtemp failed in " + scratch_root.string() + ": " + std::strerror(errno));
  }
  return Workspace(fs::path(pattern));
}

Workspace::Workspace(Workspace&& other) noexcept
    : root_(std::exchange(other.root_, {})), artifacts_(std::move(other.artifacts_)) {}

Workspace& Workspace::operator=(Workspace&& other) noexcept {
  if (this != &other) {
    release();
    root_ = std::exchange(other.root_, {});
    artifacts_ = std::move(other.artifacts_);
  }
  return *this;
}

Workspace::~Workspace() { release(); }

void Workspace::release() {
  if (root_.empty()) return;
  std::error_code ec;
  fs::remove_all(root_, ec);
  root_.clear();
  artifacts_.clear();
}

void Workspace::register_artifact(std::string name, fs::path path) { artifacts_[std::move(name)] = std::move(path); }

std::optional<fs::path> Workspace::artifact(std::string_view name) const {
  auto it = artifacts_.find(name);
  if (it == artifacts_.end()) return std::nullopt;
  return it->second;
}

fs::path Workspace::write(const std::string& name, std::string_view content) {
  auto path = root_ / name;
  detail::write_file(path, content);
  register_artifact(name, path);
  return path;
}

// ---------------------------------------------------------------------------
// Processes

std::string shell_join(const std::vector<std::string>& argv) {
  std::string out;
  for (const auto& arg : argv) {
    if (!out.empty()) out += ' ';
    const bool plain = !arg.empty() && arg.find_first_not_of(
                                           "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-+./=:,@") ==
                                           std::string::npos;
    if (plain) {
      out += arg;
      continue;
    }
    out += '\'';
    for (char c : arg) {
      if (c == '\'') out += "'\\''";
      else out += c;
    }
    out += '\'';
  }
  return out;
}

namespace {

struct Capture {
  std::string text;
  bool truncated = false;
};

void append_capped(Capture& cap, const char* data, std::size_t n, std::size_t limit) {
  if (cap.text.size() < limit) {
    const auto take = std::min(n, limit - cap.text.size());
    cap.text.append(data, take);
    if (take < n) cap.truncated = true;
  } else if (n > 0) {
    cap.truncated = true;
  }
}

std::string finish(Capture cap, std::size_t limit) {
  if (cap.truncated) cap.text += "\n[output truncated at " + std::to_string(limit) + " bytes]\n";
  return std::move(cap.text);
}

}  // namespace

ProcessResult run_process(const std::vector<std::string>& argv, const fs::path& cwd, int timeout_s,
                          const ProcessLimits& limits) {
  if (argv.empty()) throw Error(ErrorCode::Io, "run_process: empty argv");

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);
  const std::string cwd_str = cwd.string();

  int out_pipe[2];
  int err_pipe[2];
  if (::pipe2(out_pipe, O_CLOEXEC) != 0) throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));
  if (::pipe2(err_pipe, O_CLOEXEC) != 0) {
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    throw Error(ErrorCode::Io, std::string("pipe: ") + std::strerror(errno));
  }

  const auto started = std::chrono::steady_clock::now();
  const pid_t pid = ::fork();
  if (pid < 0) {
    for (int fd : {out_pipe[0], out_pipe[1], err_pipe[0], err_pipe[1]}) ::close(fd);
    throw Error(ErrorCode::Io, std::string("fork: ") + std::strerror(errno));
  }
  if (pid == 0) {
    // Child: only async-signal-safe calls from here on.
    ::setpgid(0, 0);
    if (::chdir(cwd_str.c_str()) != 0) ::_exit(126);
    int devnull = ::open("/dev/null", O_RDONLY);
    if (devnull >= 0) ::dup2(devnull, STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::dup2(err_pipe[1], STDERR_FILENO);
    if (limits.memory_limit_mb > 0) {
      rlimit rl{};
      rl.rlim_cur = rl.rlim_max = static_cast<rlim_t>(limits.memory_limit_mb) * 1024 * 1024;
      ::setrlimit(RLIMIT_AS, &rl);
    }
    if (limits.cpu_limit_s > 0) {
      rlimit rl{};
      rl.rlim_cur = rl.rlim_max = static_cast<rlim_t>(limits.cpu_limit_s);
      ::setrlimit(RLIMIT_CPU, &rl);
    }
    ::execv(cargv[0], cargv.data());
    static const char msg[] = "exec failed\n";
    [[maybe_unused]] auto w = ::write(STDERR_FILENO, msg, sizeof msg - 1);
    ::_exit(127);
  }

  ::setpgid(pid, pid);
  ::close(out_pipe[1]);
  ::close(err_pipe[1]);

  const auto deadline = started + std::chrono::seconds(timeout_s);
  Capture out_cap;
  Capture err_cap;
  std::array<pollfd, 2> fds{pollfd{out_pipe[0], POLLIN, 0}, pollfd{err_pipe[0], POLLIN, 0}};
  bool timed_out = false;
  char buf[8192];

  auto remaining_ms = [&deadline] {
    auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
    return std::max<long long>(0, left.count());
  };

  while (fds[0].fd >= 0 || fds[1].fd >= 0) {
    const auto left = remaining_ms();
    if (left == 0) {
      timed_out = true;
      break;
    }
    int rc = ::poll(fds.data(), fds.size(), static_cast<int>(std::min<long long>(left, 100)));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    for (std::size_t i = 0; i < fds.size(); ++i) {
      if (fds[i].fd < 0 || fds[i].revents == 0) continue;
      ssize_t n = ::read(fds[i].fd, buf, sizeof buf);
      if (n > 0) {
        append_capped(i == 0 ? out_cap : err_cap, buf, static_cast<std::size_t>(n), limits.output_limit_bytes);
      } else if (n == 0 || (n < 0 && errno != EINTR && errno != EAGAIN)) {
        ::close(fds[i].fd);
        fds[i].fd = -1;
      }
    }
  }

  int status = 0;
  bool reaped = false;
  while (!timed_out) {
    pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) {
      reaped = true;
      break;
    }
    if (r < 0 && errno != EINTR) break;
    if (remaining_ms() == 0) {
      timed_out = true;
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  }
  // Take down the whole group: stragglers after a clean exit, everything on
  // timeout.
  ::kill(-pid, SIGKILL);
  if (!reaped) {
    while (::waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
  }
  for (auto& f : fds) {
    if (f.fd >= 0) ::close(f.fd);
  }

  ProcessResult result;
  result.wall_time_ms =
      std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - started).count();
  result.timed_out = timed_out;
  if (!timed_out) {
    if (WIFEXITED(status)) result.exit_code = WEXITSTATUS(status);
    else if (WIFSIGNALED(status)) result.exit_code = 128 + WTERMSIG(status);
  }
  result.stdout_text = finish(std::move(out_cap), limits.output_limit_bytes);
  result.stderr_text = finish(std::move(err_cap), limits.output_limit_bytes);
  return result;
}

// ---------------------------------------------------------------------------
// Toolchain

std::optional<fs::path> find_executable(std::string_view name) {
  if (name.empty()) return std::nullopt;
  auto usable = [](const fs::path& p) {
    std::error_code ec;
    return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
  };
  if (name.find('/') != std::string_view::npos) {
    fs::path p(name);
    if (usable(p)) return fs::absolute(p);
    return std::nullopt;
  }
  const char* path_env = std::getenv("PATH");
  if (!path_env) return std::nullopt;
  std::string_view path(path_env);
  std::size_t start = 0;
  while (start <= path.size()) {
    auto end = path.find(':', start);
    if (end == std::string_view::npos) end = path.size();
    auto dir = path.substr(start, end - start);
    if (!dir.empty()) {
      fs::path candidate = fs::path(dir) / name;
      if (usable(candidate)) return fs::absolute(candidate);
    }
    start = end + 1;
  }
  return std::nullopt;
}

namespace {

fs::path resolve_compiler(const std::string& name, std::string_view default_name) {
  if (auto p = find_executable(name)) return *p;
  if (name == default_name) {
    for (int version = 15; version >= 7; --version) {
      if (auto p = find_executable(name + "-" + std::to_string(version))) return *p;
    }
  }
  throw Error(ErrorCode::ToolchainMissing, name);
}

std::string version_line(const fs::path& compiler) {
  auto r = run_process({compiler.string(), "--version"}, fs::current_path(), 30, {});
  if (r.timed_out || !r.exit_code || *r.exit_code != 0) return {};
  auto first = r.stdout_text.substr(0, r.stdout_text.find('\n'));
  return std::string(detail::trim(first));
}

}  // namespace

nlohmann::ordered_json to_json(const ToolchainReport& report) {
  return {{"fortran_compiler", report.fortran_compiler},
          {"fortran_version", report.fortran_version},
          {"cpp_compiler", report.cpp_compiler},
          {"cpp_version", report.cpp_version}};
}

ToolchainReport toolchain_report_from_json(const nlohmann::json& j) {
  return ToolchainReport{j.at("fortran_compiler").get<std::string>(), j.at("fortran_version").get<std::string>(),
                         j.at("cpp_compiler").get<std::string>(), j.at("cpp_version").get<std::string>()};
}

ToolchainReport probe_toolchain(const ToolchainOptions& options) {
  const auto fortran = resolve_compiler(options.fortran_compiler, "gfortran");
  const auto cpp = resolve_compiler(options.cpp_compiler, "g++");
  return ToolchainReport{fortran.string(), version_line(fortran), cpp.string(), version_line(cpp)};
}

// ---------------------------------------------------------------------------
// Sandbox

Sandbox::Sandbox(ToolchainOptions options) : options_(std::move(options)), report_(probe_toolchain(options_)) {
  int slots = options_.max_concurrent_compiles;
  if (slots <= 0) slots = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  compile_slots_ = std::make_unique<std::counting_semaphore<>>(slots);
}

ToolOutcome Sandbox::compile(ToolKind kind, const fs::path& compiler, const std::vector<std::string>& flags,
                             const std::string& source_name, const std::string& output_name, std::string_view source,
                             Workspace& ws, bool object_only) const {
  ws.write(source_name, source);
  std::vector<std::string> argv{compiler.string()};
  argv.insert(argv.end(), flags.begin(), flags.end());
  if (object_only) argv.emplace_back("-c");
  argv.push_back(source_name);
  argv.emplace_back("-o");
  argv.push_back(output_name);

  std::error_code ec;
  fs::remove(ws.root() / output_name, ec);

  compile_slots_->acquire();
  ProcessResult r;
  try {
    r = run_process(argv, ws.root(), options_.compile_timeout_s, ProcessLimits{options_.output_limit_bytes, 0, 0});
  } catch (...) {
    compile_slots_->release();
    throw;
  }
  compile_slots_->release();

  ToolOutcome o{kind, r.exit_code, std::move(r.stdout_text), std::move(r.stderr_text), r.timed_out, r.wall_time_ms,
                shell_join(argv)};
  if (o.ok() && fs::exists(ws.root() / output_name)) ws.register_artifact(output_name, ws.root() / output_name);
  return o;
}

ToolOutcome Sandbox::compile_fortran(std::string_view source, Workspace& ws, SourceForm form) const {
  return compile(ToolKind::CompileFortran, report_.fortran_compiler, options_.fortran_flags,
                 form == SourceForm::Fixed ? "test.f" : "test.f90", "test_f", source, ws, false);
}

ToolOutcome Sandbox::compile_cpp(std::string_view source, Workspace& ws, CompileMode mode) const {
  const bool object_only = mode == CompileMode::ObjectOnly;
  return compile(ToolKind::CompileCpp, report_.cpp_compiler, options_.cpp_flags, "test.cpp",
                 object_only ? "test_cpp.o" : "test_cpp", source, ws, object_only);
}

ToolOutcome Sandbox::execute(std::string_view binary, const Workspace& ws, int timeout_s) const {
  auto path = ws.artifact(binary);
  if (!path || !fs::exists(*path)) throw Error(ErrorCode::BinaryMissing, std::string(binary));
  const std::string relative = "./" + path->filename().string();
  auto r = run_process({path->string()}, ws.root(), timeout_s,
                       ProcessLimits{options_.output_limit_bytes, options_.memory_limit_mb, options_.cpu_limit_s});
  return ToolOutcome{ToolKind::Execute, r.exit_code, std::move(r.stdout_text), std::move(r.stderr_text),
                     r.timed_out, r.wall_time_ms, relative};
}

}  // namespace f2c
