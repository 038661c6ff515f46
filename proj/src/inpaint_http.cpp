#include <string>

#include <httplib.h>

#include "maniloc/errors.hpp"

namespace maniloc::dsops {

void post_inpaint_job(const std::string& endpoint, const std::string& body) {
    // endpoint: http://host:port/path
    const auto scheme_end = endpoint.find("://");
    const auto path_start = endpoint.find('/', scheme_end + 3);
    const std::string base =
        path_start == std::string::npos ? endpoint : endpoint.substr(0, path_start);
    const std::string path = path_start == std::string::npos ? "/" : endpoint.substr(path_start);

    httplib::Client client(base);
    client.set_connection_timeout(5, 0);
    client.set_read_timeout(300, 0);
    auto response = client.Post(path, body, "application/json");
    if (!response)
        throw RuntimeFailure("inpainter endpoint unreachable: " + endpoint);
    if (response->status != 200)
        throw RuntimeFailure("inpainter endpoint returned HTTP " +
                             std::to_string(response->status));
}

}  // namespace maniloc::dsops
