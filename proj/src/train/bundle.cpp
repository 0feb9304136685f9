#include "nire/bundle.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "nire/error.hpp"

namespace nire {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string image_name(const std::string& stem, const sim::Frame& f) {
  return stem + (f.channels == 3 ? ".ppm" : ".pgm");
}

}  // namespace

void write_bundle(const std::string& dir, const sim::TaskSample& sample) {
  fs::create_directories(dir);
  json inputs = json::array();
  for (std::size_t i = 0; i < sample.inputs.size(); ++i) {
    const auto& f = sample.inputs[i];
    const auto name = image_name("input" + std::to_string(i), f);
    sim::write_pnm((fs::path(dir) / name).string(), f, 16);
    inputs.push_back({{"file", name}, {"shutter", sim::format_shutter(f.shutter)}});
  }
  const auto target = image_name("target", sample.target);
  sim::write_pnm((fs::path(dir) / target).string(), sample.target, 16);
  sim::save_events(fs::path(dir) / "events.nrev", sample.events);
  const auto& first = sample.inputs.empty() ? sample.target : sample.inputs.front();
  json manifest = {{"task", sim::to_string(sample.task)},
                   {"scene_seed", sample.scene_seed},
                   {"width", first.width},
                   {"height", first.height},
                   {"channels", first.channels},
                   {"inputs", inputs},
                   {"events", "events.nrev"},
                   {"target", {{"file", target}, {"shutter", sim::format_shutter(sample.target_shutter)}}}};
  std::ofstream(fs::path(dir) / "manifest.json") << manifest.dump(2) << "\n";
}

sim::TaskSample read_bundle(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "manifest.json");
  if (!in) throw FormatError("no manifest.json in " + dir);
  std::stringstream ss;
  ss << in.rdbuf();
  sim::TaskSample s;
  try {
    const auto m = json::parse(ss.str());
    s.task = sim::parse_task(m.at("task").get<std::string>());
    s.scene_seed = m.value("scene_seed", std::uint64_t{0});
    for (const auto& entry : m.at("inputs")) {
      auto f = sim::read_pnm((fs::path(dir) / entry.at("file").get<std::string>()).string());
      f.shutter = sim::parse_shutter(entry.at("shutter").get<std::string>());
      s.inputs.push_back(std::move(f));
    }
    s.events = sim::load_events(fs::path(dir) / m.at("events").get<std::string>());
    const auto& t = m.at("target");
    s.target_shutter = sim::parse_shutter(t.at("shutter").get<std::string>());
    const auto target_file = fs::path(dir) / t.at("file").get<std::string>();
    if (fs::exists(target_file)) {
      s.target = sim::read_pnm(target_file.string());
      s.target.shutter = s.target_shutter;
    }
  } catch (const json::exception& e) {
    throw FormatError("bad manifest in " + dir + ": " + e.what());
  }
  if (s.inputs.empty()) throw FormatError("bundle " + dir + " has no input frames");
  return s;
}

}  // namespace nire
