#include "stealth/errors.hpp"

namespace stealth {

void throw_invalid(const std::string& what) { throw InvalidInput(what); }

}  // namespace stealth
