#include "sarplan/service/persist.hpp"

#include <algorithm>
#include <filesystem>
#include <stdexcept>

#include "sarplan/exec/replay.hpp"

namespace sarplan::service {

namespace fs = std::filesystem;

bool valid_session_id(const std::string& id) {
  if (id.empty() || id.size() > 64) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) { return std::isalnum(c) || c == '-' || c == '_'; });
}

std::string log_path_for(const std::string& log_dir, const std::string& id) {
  return (fs::path(log_dir) / (id + ".jsonl")).string();
}

std::shared_ptr<exec::Session> create_persistent(const std::string& log_dir, const std::string& id,
                                                 const exec::SessionInputs& inputs) {
  if (!valid_session_id(id)) throw std::invalid_argument("bad session id " + id);
  fs::create_directories(log_dir);
  const auto path = log_path_for(log_dir, id);
  if (fs::exists(path) && fs::file_size(path) > 0) throw std::invalid_argument("session " + id + " already has a log");
  try {
    return std::make_shared<exec::Session>(id, inputs, exec::SessionOptions{.log_path = path});
  } catch (...) {
    // A session that never started leaves no log behind.
    std::error_code ec;
    fs::remove(path, ec);
    throw;
  }
}

std::vector<Recovered> recover_sessions(const std::string& log_dir, std::vector<std::string>* skipped) {
  std::vector<Recovered> out;
  if (!fs::is_directory(log_dir)) return out;
  std::vector<fs::path> logs;
  for (const auto& entry : fs::directory_iterator(log_dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl") logs.push_back(entry.path());
  }
  std::sort(logs.begin(), logs.end());
  for (const auto& p : logs) {
    const auto id = p.stem().string();
    if (!valid_session_id(id)) continue;
    Recovered r;
    try {
      r.session = exec::load_session(p.string(), nullptr, id, &r.warnings);
    } catch (const std::exception& e) {
      if (skipped) skipped->push_back(p.string() + ": " + e.what());
      continue;
    }
    if (r.session->id() != id) {
      if (skipped) skipped->push_back(p.string() + ": log belongs to session " + r.session->id());
      continue;
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace sarplan::service
