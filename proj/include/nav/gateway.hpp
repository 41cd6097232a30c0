#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "nav/corpus.hpp"
#include "nav/engine.hpp"
#include "nav/user_store.hpp"

namespace httplib {
class Server;
}

namespace nav {

struct Request {
  std::string method = "GET";
  std::string path;
  std::multimap<std::string, std::string> query;
  std::string body;

  /// Parses "path?a=1&b=2" with percent-decoding.
  static Request get(const std::string& target);
};

struct Response {
  int status = 200;
  Json body;
};

/// The /v1 API. handle() is a pure router over the engine snapshot and the
/// user store, so it can be exercised without sockets; serve() wraps it in an
/// HTTP server.
class Gateway {
public:
  Gateway(Engine& engine, UserStore& users);
  ~Gateway();

  Response handle(const Request& req);

  /// Binds (port 0 picks a free port) and returns the bound port, or -1.
  int bind(const std::string& host, int port);
  /// Blocks until stop().
  void listen();
  void stop();

private:
  Response search(const Request& req);
  Response experts(const Request& req);
  Response recommendations(const Request& req);
  Response popularity(const Request& req);
  Response document(const std::string& id);
  Response kg_concepts(const Request& req);
  Response kg_stats();
  Response ingest(const Request& req);
  Response list_tags(const Request& req);
  Response add_tag(const Request& req);
  Response delete_tag(const Request& req);
  Response list_notes(const Request& req);
  Response add_note(const Request& req);
  Response delete_note(const std::string& id);
  Response set_weights(const Request& req);

  Engine& engine_;
  UserStore& users_;
  std::mutex ingest_mutex_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace nav
