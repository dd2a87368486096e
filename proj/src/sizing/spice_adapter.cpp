#include <fcntl.h>
#include <signal.h>
#include <spawn.h>
#include <sys/stat.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <regex>
#include <thread>

#include "amflow/io.hpp"
#include "amflow/sizing.hpp"
#include "../util/strings.hpp"

extern char** environ;

namespace am::sizing {

namespace fs = std::filesystem;
using netlist::DeviceKind;
using netlist::RailRole;

namespace {

bool executable(const fs::path& p) {
  std::error_code ec;
  return fs::is_regular_file(p, ec) && ::access(p.c_str(), X_OK) == 0;
}

}  // namespace

std::string find_simulator(const std::string& name) {
  if (name.empty()) return {};
  if (name.find('/') != std::string::npos) return executable(name) ? fs::absolute(name).string() : std::string();
  const char* path = std::getenv("PATH");
  if (!path) return {};
  std::string_view rest(path);
  while (!rest.empty()) {
    const auto colon = rest.find(':');
    const std::string dir(rest.substr(0, colon));
    if (!dir.empty() && executable(fs::path(dir) / name)) return (fs::path(dir) / name).string();
    if (colon == std::string_view::npos) break;
    rest.remove_prefix(colon + 1);
  }
  return {};
}

std::string build_deck(const netlist::NetlistIR& sized, const SpiceAdapterConfig& config) {
  std::string deck = "* sizing deck\n";
  if (!config.pdk_include.empty()) deck += ".lib \"" + config.pdk_include + "\" " + config.corner + "\n";
  deck += ".temp " + util::format_double(config.temperature_c) + "\n";

  std::string body = netlist::serialize(sized);
  const auto end = body.rfind(".end");
  if (end != std::string::npos) body.erase(end);
  deck += body;

  std::set<std::string> driven;
  std::string supply_src;
  for (const auto& d : sized.devices) {
    if (d.kind != DeviceKind::V) continue;
    for (const auto& p : d.ports) {
      driven.insert(p.net);
      const auto it = sized.named_rails.find(p.net);
      if (it != sized.named_rails.end() && it->second == RailRole::VDD) supply_src = d.id;
    }
  }
  std::size_t undriven_inputs = 0;
  for (const auto& [net, role] : sized.named_rails)
    undriven_inputs += role == RailRole::Input && !driven.count(net);
  // Differential drive splits the unit stimulus across both inputs.
  const std::string ac = undriven_inputs > 1 ? " AC 0.5" : " AC 1";
  std::string out_net;
  for (const auto& [net, role] : sized.named_rails) {
    if (driven.count(net)) continue;
    if (role == RailRole::VDD) {
      deck += "Vsz_vdd " + net + " 0 DC " + util::format_double(config.vdd) + "\n";
      supply_src = "Vsz_vdd";
    } else if (role == RailRole::Input) {
      const bool neg = input_polarity(net) < 0;
      deck += "Vsz_" + net + " " + net + " 0 DC " + util::format_double(config.input_cm) + ac +
              (neg ? " 180" : "") + "\n";
    }
    if (role == RailRole::Output && out_net.empty()) out_net = net;
  }
  if (out_net.empty()) throw UnsupportedTopology("deck needs an output net");
  deck += "Csz_load " + out_net + " 0 " + util::format_double(config.c_load) + "\n";
  deck += ".control\n";
  deck += "op\n";
  if (!supply_src.empty())
    deck += "let power_w = -i(" + supply_src + ") * " + util::format_double(config.vdd) + "\nprint power_w\n";
  deck += "ac dec 20 1 10g\n";
  deck += "meas ac gain_db find vdb(" + out_net + ") at=1\n";
  deck += "meas ac gbw_hz when vdb(" + out_net + ")=0\n";
  for (const auto& line : config.extra_control) deck += line + "\n";
  deck += "quit\n.endc\n.end\n";
  return deck;
}

Metrics parse_measures(const std::string& output, const std::vector<std::string>& names) {
  Metrics m;
  for (const auto& name : names) {
    const std::regex re("^\\s*" + name + "\\s*=\\s*([-+]?[0-9]*\\.?[0-9]+(?:[eE][-+]?[0-9]+)?)",
                        std::regex::multiline);
    std::smatch match;
    if (!std::regex_search(output, match, re)) throw MeasureParseError("measure '" + name + "' not found in output");
    m[name] = std::stod(match[1].str());
  }
  return m;
}

Metrics spice_evaluate(const netlist::NetlistIR& ir, const ParameterSpace& space, const Point& x,
                       const SpiceAdapterConfig& config) {
  const std::string sim = find_simulator(config.simulator);
  if (sim.empty()) throw SimulatorNotFound("simulator '" + config.simulator + "' not found");

  const auto sized = space.dims.empty() ? ir : apply_point(ir, space, x);
  fs::path dir = config.work_dir;
  bool temp = false;
  if (dir.empty()) {
    std::string templ = (fs::temp_directory_path() / "amsim-XXXXXX").string();
    if (!::mkdtemp(templ.data())) throw Error("cannot create simulation directory");
    dir = templ;
    temp = true;
  }
  fs::create_directories(dir);
  const fs::path deck = dir / "deck.cir";
  const fs::path log = dir / "sim.log";
  write_file(deck.string(), build_deck(sized, config));

  posix_spawn_file_actions_t actions;
  posix_spawn_file_actions_init(&actions);
  posix_spawn_file_actions_addopen(&actions, STDOUT_FILENO, log.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
  posix_spawn_file_actions_adddup2(&actions, STDOUT_FILENO, STDERR_FILENO);
  const std::string flag = "-b";
  const std::string deck_s = deck.string();
  char* argv[] = {const_cast<char*>(sim.c_str()), const_cast<char*>(flag.c_str()), const_cast<char*>(deck_s.c_str()),
                  nullptr};
  pid_t pid = 0;
  const int rc = ::posix_spawn(&pid, sim.c_str(), &actions, nullptr, argv, environ);
  posix_spawn_file_actions_destroy(&actions);
  if (rc != 0) throw SimulatorNotFound("cannot launch '" + sim + "'");

  const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(config.timeout_seconds);
  int status = 0;
  while (true) {
    const pid_t done = ::waitpid(pid, &status, WNOHANG);
    if (done == pid) break;
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      if (temp) fs::remove_all(dir);
      throw SimulationTimeout("simulator exceeded " + util::format_double(config.timeout_seconds) + " s");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
  const std::string output = read_file(log.string());
  if (temp) fs::remove_all(dir);
  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0)
    throw MeasureParseError("simulator exited abnormally: " + output.substr(0, 200));
  return parse_measures(output, config.measures);
}

}  // namespace am::sizing
