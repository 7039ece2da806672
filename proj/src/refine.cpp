#include "wmlab/attack.hpp"
#include "wmlab/errors.hpp"
#include "wmlab/png_io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <system_error>

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

namespace fs = std::filesystem;

namespace wmlab {

namespace {

std::string shell_quote(const std::string &s) {
  std::string out = "'";
  for (char c : s) {
    if (c == '\'') {
      out += "'\\''";
    } else {
      out += c;
    }
  }
  out += '\'';
  return out;
}

void replace_all(std::string &s, const std::string &from, const std::string &to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

fs::path temp_parent(const RefinerSpec &spec) {
  if (!spec.temp_dir.empty()) {
    return spec.temp_dir;
  }
  if (const char *env = std::getenv("WMLAB_TMPDIR"); env != nullptr && *env != '\0') {
    return env;
  }
  return fs::temp_directory_path();
}

class TempDir {
public:
  explicit TempDir(const fs::path &parent) {
    std::string tmpl = (parent / "wmlab-refine-XXXXXX").string();
    if (::mkdtemp(tmpl.data()) == nullptr) {
      throw RefinerError(RefinerErrc::spawn_failed, "cannot create temp directory under " + parent.string());
    }
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir &) = delete;
  TempDir &operator=(const TempDir &) = delete;

  const fs::path &path() const noexcept { return path_; }

private:
  fs::path path_;
};

struct ProcessResult {
  int status = 0;
  std::string err;
};

// Runs `command` through /bin/sh in its own process group. Stdout is
// discarded, stderr captured. Kills the group when the timeout expires.
ProcessResult run_command(const std::string &command, double timeout_seconds) {
  int pipefd[2];
  if (::pipe(pipefd) != 0) {
    throw RefinerError(RefinerErrc::spawn_failed, "pipe() failed");
  }
  const pid_t pid = ::fork();
  if (pid < 0) {
    ::close(pipefd[0]);
    ::close(pipefd[1]);
    throw RefinerError(RefinerErrc::spawn_failed, "fork() failed");
  }
  if (pid == 0) {
    ::setpgid(0, 0);
    ::dup2(pipefd[1], STDERR_FILENO);
    const int devnull = ::open("/dev/null", O_RDWR);
    if (devnull >= 0) {
      ::dup2(devnull, STDOUT_FILENO);
      ::dup2(devnull, STDIN_FILENO);
    }
    ::close(pipefd[0]);
    ::close(pipefd[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char *>(nullptr));
    ::_exit(127);
  }
  ::setpgid(pid, pid);
  ::close(pipefd[1]);

  using clock = std::chrono::steady_clock;
  const auto deadline = clock::now() + std::chrono::duration_cast<clock::duration>(
                                           std::chrono::duration<double>(timeout_seconds));
  ProcessResult result;
  bool open = true;
  bool timed_out = false;
  char buf[4096];
  while (open) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd pfd{pipefd[0], POLLIN, 0};
    const int rc = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (rc > 0) {
      const ssize_t n = ::read(pipefd[0], buf, sizeof buf);
      if (n > 0) {
        result.err.append(buf, static_cast<std::size_t>(n));
      } else {
        open = false;
      }
    }
  }
  ::close(pipefd[0]);

  // The pipe can close before the child exits (it may close stderr itself).
  while (!timed_out) {
    const pid_t w = ::waitpid(pid, &result.status, WNOHANG);
    if (w == pid) {
      return result;
    }
    if (clock::now() >= deadline) {
      timed_out = true;
      break;
    }
    ::usleep(5000);
  }
  ::kill(-pid, SIGKILL);
  ::waitpid(pid, &result.status, 0);
  throw RefinerError(RefinerErrc::timeout,
                     "refiner exceeded " + std::to_string(timeout_seconds) + " s", result.err);
}

ColorImage refine_external(const ColorImage &img, const RefinerSpec &spec, std::string *captured) {
  TempDir dir(temp_parent(spec));
  const fs::path in_path = dir.path() / "input.png";
  const fs::path out_path = dir.path() / "output.png";
  save_image(img.space == ColorSpace::RGB ? img : ycbcr_to_rgb(img), in_path);

  char strength[32];
  std::snprintf(strength, sizeof strength, "%.6g", spec.strength);
  std::string command = spec.command;
  replace_all(command, "{input}", shell_quote(in_path.string()));
  replace_all(command, "{output}", shell_quote(out_path.string()));
  replace_all(command, "{strength}", strength);

  const ProcessResult pr = run_command(command, spec.timeout_seconds);
  if (captured != nullptr) {
    *captured = pr.err;
  }
  if (WIFEXITED(pr.status) && WEXITSTATUS(pr.status) == 127) {
    throw RefinerError(RefinerErrc::spawn_failed, "refiner command could not be started", pr.err);
  }
  if (!WIFEXITED(pr.status) || WEXITSTATUS(pr.status) != 0) {
    const std::string how = WIFEXITED(pr.status)
                                ? "exit status " + std::to_string(WEXITSTATUS(pr.status))
                                : "signal " + std::to_string(WTERMSIG(pr.status));
    throw RefinerError(RefinerErrc::nonzero_exit, "refiner failed with " + how, pr.err);
  }
  if (!fs::exists(out_path)) {
    throw RefinerError(RefinerErrc::bad_output, "refiner wrote no output image", pr.err);
  }
  ColorImage out;
  try {
    out = load_image(out_path);
  } catch (const ImageIoError &e) {
    throw RefinerError(RefinerErrc::bad_output, std::string("refiner output unreadable: ") + e.what(),
                       pr.err);
  }
  if (!out.same_shape(img)) {
    throw RefinerError(RefinerErrc::bad_output,
                       "refiner output is " + std::to_string(out.width()) + "x" +
                           std::to_string(out.height()) + ", expected " + std::to_string(img.width()) +
                           "x" + std::to_string(img.height()),
                       pr.err);
  }
  return out;
}

} // namespace

void RefinerSpec::validate() const {
  if (kind == RefinerKind::builtin) {
    if (!(tv_weight >= 0.0) || iterations < 0 || !(tv_epsilon > 0.0)) {
      throw ConfigError("builtin refiner: need tv_weight >= 0, iterations >= 0, epsilon > 0");
    }
    return;
  }
  if (command.find("{input}") == std::string::npos || command.find("{output}") == std::string::npos) {
    throw ConfigError("refiner command must contain {input} and {output} placeholders");
  }
  if (!(timeout_seconds > 0.0)) {
    throw ConfigError("refiner timeout must be positive");
  }
}

ColorImage tv_refine(const ColorImage &img, double lambda, int iterations, double epsilon) {
  if (!(lambda >= 0.0) || iterations < 0 || !(epsilon > 0.0)) {
    throw PreconditionError("tv_refine: need lambda >= 0, iterations >= 0, epsilon > 0");
  }
  ColorImage out = img.space == ColorSpace::RGB ? img : ycbcr_to_rgb(img);
  const int w = out.width();
  const int h = out.height();
  // Explicit scheme; the curvature term's Lipschitz bound is 8*lambda/eps.
  const double step = 0.9 / (1.0 + 8.0 * lambda / epsilon);
  const std::size_t n = static_cast<std::size_t>(w) * h;
  std::vector<double> px(n), py(n);
  for (RasterPlane &plane : out.planes) {
    const std::vector<double> f(plane.samples().begin(), plane.samples().end());
    auto u = plane.samples();
    for (int it = 0; it < iterations; ++it) {
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          const double ux = x + 1 < w ? u[i + 1] - u[i] : 0.0;
          const double uy = y + 1 < h ? u[i + w] - u[i] : 0.0;
          const double norm = std::sqrt(ux * ux + uy * uy + epsilon * epsilon);
          px[i] = ux / norm;
          py[i] = uy / norm;
        }
      }
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          const std::size_t i = static_cast<std::size_t>(y) * w + x;
          const double div = px[i] - (x > 0 ? px[i - 1] : 0.0) + py[i] - (y > 0 ? py[i - w] : 0.0);
          u[i] -= step * ((u[i] - f[i]) - lambda * div);
        }
      }
    }
  }
  return out;
}

ColorImage refine(const ColorImage &img, const RefinerSpec &spec, std::string *captured_stderr) {
  spec.validate();
  if (spec.kind == RefinerKind::builtin) {
    return tv_refine(img, spec.tv_weight, spec.iterations, spec.tv_epsilon);
  }
  return refine_external(img, spec, captured_stderr);
}

} // namespace wmlab
