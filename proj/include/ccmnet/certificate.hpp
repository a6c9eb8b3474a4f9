#ifndef CCMNET_CERTIFICATE_HPP
#define CCMNET_CERTIFICATE_HPP

#include <string>

#include "ccmnet/synthesis.hpp"

namespace ccmnet {

/// JSON serialization of certificates. Polynomial coefficients are stored as
/// JSON numbers (shortest round-trip form), so save -> load reproduces every
/// double bit-exactly.
std::string certificate_to_string(const CCMCertificate& cert);
CCMCertificate certificate_from_string(const std::string& text);

/// Atomic file I/O (write-temp-then-rename). Throws std::runtime_error on
/// unreadable files or malformed content.
void save_certificate(const CCMCertificate& cert, const std::string& path);
CCMCertificate load_certificate(const std::string& path);

}  // namespace ccmnet

#endif
