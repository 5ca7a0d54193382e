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

#ifndef BIASMATRIX_REMOTE_HPP_
#define BIASMATRIX_REMOTE_HPP_

#include <memory>
#include <string>

#include "biasmatrix/protocol.hpp"

namespace biasmatrix {

// Client side of the wire protocol. Endpoints:
//   http://host:port[/prefix]   POST <prefix>/generate and <prefix>/annotate
//   exec:<shell command>        child process, one JSON line each way
// A failed exchange tears the channel down; the next call reconnects.
class RemoteBackend : public Backend {
 public:
  RemoteBackend(std::string endpoint, int timeout_ms);
  ~RemoteBackend() override;

  GenerateResponse generate(const GenerateRequest& request) override;
  AnnotateResponse annotate(const AnnotateRequest& request) override;
  std::string id() const override { return "remote:" + endpoint_; }

  class Channel {
   public:
    virtual ~Channel() = default;
    virtual std::string exchange(const std::string& route, const std::string& line) = 0;
  };

 private:
  Message call(const std::string& route, const Message& request);

  std::string endpoint_;
  int timeout_ms_;
  std::unique_ptr<Channel> channel_;
};

}  // namespace biasmatrix

#endif  // BIASMATRIX_REMOTE_HPP_
