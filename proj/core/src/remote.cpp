/* Copyright 2026 The biasmatrix Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include "biasmatrix/remote.hpp"

#include <poll.h>
#include <signal.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include "biasmatrix/errors.hpp"
#include "httplib.h"

namespace biasmatrix {

namespace {

class ProcessChannel : public RemoteBackend::Channel {
 public:
  ProcessChannel(std::string command, int timeout_ms)
      : command_(std::move(command)), timeout_ms_(timeout_ms) {
    int fds[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) != 0) {
      throw BackendError(std::string("socketpair failed: ") + std::strerror(errno));
    }
    pid_ = ::fork();
    if (pid_ < 0) {
      ::close(fds[0]);
      ::close(fds[1]);
      throw BackendError(std::string("fork failed: ") + std::strerror(errno));
    }
    if (pid_ == 0) {
      ::close(fds[0]);
      ::dup2(fds[1], STDIN_FILENO);
      ::dup2(fds[1], STDOUT_FILENO);
      ::close(fds[1]);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(), static_cast<char*>(nullptr));
      ::_exit(127);
    }
    ::close(fds[1]);
    fd_ = fds[0];
  }

  ~ProcessChannel() override {
    if (fd_ >= 0) ::close(fd_);
    if (pid_ > 0) {
      for (int i = 0; i < 50; ++i) {
        if (::waitpid(pid_, nullptr, WNOHANG) == pid_) return;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
      }
      ::kill(pid_, SIGKILL);
      ::waitpid(pid_, nullptr, 0);
    }
  }

  std::string exchange(const std::string&, const std::string& line) override {
    std::string payload = line + "\n";
    std::size_t sent = 0;
    while (sent < payload.size()) {
      const ssize_t n = ::send(fd_, payload.data() + sent, payload.size() - sent, MSG_NOSIGNAL);
      if (n < 0) {
        if (errno == EINTR) continue;
        throw BackendError("backend process '" + command_ + "' closed its input");
      }
      sent += static_cast<std::size_t>(n);
    }
    const auto deadline =
        std::chrono::steady_clock::now() + std::chrono::milliseconds(timeout_ms_);
    for (;;) {
      if (const auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string out = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return out;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
          deadline - std::chrono::steady_clock::now());
      if (left.count() <= 0) throw BackendError("backend process timed out");
      pollfd pfd{fd_, POLLIN, 0};
      const int ready = ::poll(&pfd, 1, static_cast<int>(left.count()));
      if (ready < 0 && errno == EINTR) continue;
      if (ready <= 0) throw BackendError("backend process timed out");
      char chunk[4096];
      const ssize_t n = ::read(fd_, chunk, sizeof chunk);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) throw BackendError("backend process '" + command_ + "' exited");
      buffer_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  std::string command_;
  int timeout_ms_;
  pid_t pid_ = -1;
  int fd_ = -1;
  std::string buffer_;
};

class HttpChannel : public RemoteBackend::Channel {
 public:
  HttpChannel(const std::string& url, int timeout_ms) {
    // Split "http://host:port/prefix" into client base and route prefix.
    const auto scheme_end = url.find("://");
    const auto path_start =
        url.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string base = path_start == std::string::npos ? url : url.substr(0, path_start);
    if (path_start != std::string::npos) prefix_ = url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    client_ = std::make_unique<httplib::Client>(base);
    const auto seconds = timeout_ms / 1000;
    const auto micros = (timeout_ms % 1000) * 1000;
    client_->set_connection_timeout(seconds, micros);
    client_->set_read_timeout(seconds, micros);
    client_->set_write_timeout(seconds, micros);
  }

  std::string exchange(const std::string& route, const std::string& line) override {
    auto res = client_->Post(prefix_ + route, line, "application/json");
    if (!res) {
      throw BackendError("HTTP request to " + prefix_ + route +
                         " failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200 && res->body.empty()) {
      throw BackendError("HTTP status " + std::to_string(res->status));
    }
    std::string body = res->body;
    while (!body.empty() && (body.back() == '\n' || body.back() == '\r')) body.pop_back();
    return body;
  }

 private:
  std::unique_ptr<httplib::Client> client_;
  std::string prefix_;
};

std::unique_ptr<RemoteBackend::Channel> open_channel(const std::string& endpoint,
                                                     int timeout_ms) {
  if (endpoint.rfind("exec:", 0) == 0) {
    return std::make_unique<ProcessChannel>(endpoint.substr(5), timeout_ms);
  }
  if (endpoint.rfind("http://", 0) == 0) {
    return std::make_unique<HttpChannel>(endpoint, timeout_ms);
  }
  throw ConfigError("unsupported remote endpoint '" + endpoint +
                    "' (expected http://... or exec:<command>)");
}

}  // namespace

RemoteBackend::RemoteBackend(std::string endpoint, int timeout_ms)
    : endpoint_(std::move(endpoint)), timeout_ms_(timeout_ms) {
  if (endpoint_.rfind("https://", 0) == 0) {
    throw ConfigError("https endpoints are not supported (no TLS in this build); use an "
                      "http:// endpoint behind a local proxy");
  }
  if (endpoint_.rfind("exec:", 0) != 0 && endpoint_.rfind("http://", 0) != 0) {
    throw ConfigError("unsupported remote endpoint '" + endpoint_ +
                      "' (expected http://... or exec:<command>)");
  }
}

RemoteBackend::~RemoteBackend() = default;

Message RemoteBackend::call(const std::string& route, const Message& request) {
  if (!channel_) channel_ = open_channel(endpoint_, timeout_ms_);
  Message response;
  try {
    response = parse_line(channel_->exchange(route, serialize_line(request)));
  } catch (const BackendError&) {
    channel_.reset();
    throw;
  }
  if (const auto* err = std::get_if<ErrorResponse>(&response)) {
    throw BackendError("backend error: " + err->message);
  }
  return response;
}

GenerateResponse RemoteBackend::generate(const GenerateRequest& request) {
  Message response = call("/generate", request);
  auto* out = std::get_if<GenerateResponse>(&response);
  if (!out) throw BackendError("protocol violation: expected a 'generated' reply");
  return std::move(*out);
}

AnnotateResponse RemoteBackend::annotate(const AnnotateRequest& request) {
  Message response = call("/annotate", request);
  auto* out = std::get_if<AnnotateResponse>(&response);
  if (!out) throw BackendError("protocol violation: expected an 'annotated' reply");
  return std::move(*out);
}

}  // namespace biasmatrix
