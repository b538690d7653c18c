#pragma once

#include <memory>
#include <string>
#include <vector>

#include "sarplan/exec/session.hpp"

namespace sarplan::service {

/// Session ids double as file names, so they are restricted to
/// [A-Za-z0-9_-], 1..64 characters.
bool valid_session_id(const std::string& id);

std::string log_path_for(const std::string& log_dir, const std::string& id);

/// Open a new session whose log lives in `log_dir`. Throws
/// std::invalid_argument for a bad id and whatever Session throws.
std::shared_ptr<exec::Session> create_persistent(const std::string& log_dir, const std::string& id,
                                                 const exec::SessionInputs& inputs);

struct Recovered {
  std::shared_ptr<exec::Session> session;
  std::vector<std::string> warnings;
};

/// Rebuild every session logged in `log_dir` by replay. Logs that cannot
/// be recovered are skipped with a warning in `skipped`.
std::vector<Recovered> recover_sessions(const std::string& log_dir, std::vector<std::string>* skipped = nullptr);

}  // namespace sarplan::service
