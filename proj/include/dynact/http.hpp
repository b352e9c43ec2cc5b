#pragma once

// Minimal blocking HTTP client used by the chat/embedding providers and the
// interpreter's urllib.request module.

#include "dynact/core.hpp"

#include <map>
#include <string>

namespace dynact {

struct HttpResponse {
    int status = 0;
    std::string body;
};

class HttpError : public Error {
public:
    using Error::Error;
};

struct ParsedUrl {
    std::string scheme;  // "http" or "https"
    std::string host;
    int port = 0;
    std::string path;    // includes the query string, starts with '/'
};

/// Throws HttpError for anything but http:// and https:// URLs.
ParsedUrl parse_url(const std::string& url);

/// Transport failures throw HttpError; HTTP error statuses are returned.
HttpResponse http_get(const std::string& url, int timeout_s = 60);

HttpResponse http_post(const std::string& url, const std::string& body, const std::string& content_type,
                       const std::map<std::string, std::string>& headers, int timeout_s = 120);

}  // namespace dynact
