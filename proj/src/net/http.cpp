#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include "dynact/http.hpp"

#include <fmt/format.h>

#include <regex>

namespace dynact {

ParsedUrl parse_url(const std::string& url)
{
    static const std::regex re(R"(^(https?)://([^/:?#]+)(?::(\d+))?([^#]*))", std::regex::icase);
    std::smatch m;
    if (!std::regex_search(url, m, re))
        throw HttpError(fmt::format("unsupported URL: {}", url));
    ParsedUrl out;
    out.scheme = m[1].str();
    for (auto& c : out.scheme)
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    out.host = m[2].str();
    out.port = m[3].matched ? std::stoi(m[3].str()) : (out.scheme == "https" ? 443 : 80);
    out.path = m[4].str();
    if (out.path.empty())
        out.path = "/";
    else if (out.path.front() == '?')
        out.path = "/" + out.path;
    return out;
}

namespace {

std::unique_ptr<httplib::Client> make_client(const ParsedUrl& u, int timeout_s)
{
    auto cli = std::make_unique<httplib::Client>(fmt::format("{}://{}:{}", u.scheme, u.host, u.port));
    cli->set_follow_location(true);
    cli->set_connection_timeout(timeout_s, 0);
    cli->set_read_timeout(timeout_s, 0);
    cli->set_write_timeout(timeout_s, 0);
    return cli;
}

HttpResponse finish(const httplib::Result& res, const std::string& url)
{
    if (!res)
        throw HttpError(fmt::format("request to {} failed: {}", url, httplib::to_string(res.error())));
    return HttpResponse{res->status, res->body};
}

}  // namespace

HttpResponse http_get(const std::string& url, int timeout_s)
{
    auto u = parse_url(url);
    auto cli = make_client(u, timeout_s);
    return finish(cli->Get(u.path), url);
}

HttpResponse http_post(const std::string& url, const std::string& body, const std::string& content_type,
                       const std::map<std::string, std::string>& headers, int timeout_s)
{
    auto u = parse_url(url);
    auto cli = make_client(u, timeout_s);
    httplib::Headers h(headers.begin(), headers.end());
    return finish(cli->Post(u.path, h, body, content_type), url);
}

}  // namespace dynact
