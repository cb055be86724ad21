"""Minimal in-process HTTP stubs for the remote generator and scorer wire
contracts, used by the engine's backend tests."""

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class _Handler(BaseHTTPRequestHandler):
    def log_message(self, *args):
        pass

    def _read_json(self):
        length = int(self.headers.get("Content-Length", 0))
        return json.loads(self.rfile.read(length))

    def _send(self, status, body):
        payload = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_POST(self):
        request = self._read_json()
        if self.path == "/chat":
            self.server.requests.append(request)
            if self.server.fail_next > 0:
                self.server.fail_next -= 1
                self.connection.close()
                return
            if self.server.status != 200:
                self._send(self.server.status, {"error": "injected"})
                return
            n = request.get("n", 1)
            temperature = request.get("temperature", 0.0)
            seed_text = request["messages"][-1]["content"]
            choices = []
            for i in range(n):
                suffix = "" if temperature == 0.0 else f"_{i}"
                content = f"```python\nresult = {len(seed_text)}{suffix}\n```"
                choices.append(
                    {"index": i, "message": {"role": "assistant", "content": content}}
                )
            self._send(200, {"model": request.get("model", ""), "choices": choices})
        elif self.path == "/score":
            self._send(200, {"score": float(len(request.get("code", "")) % 7) - 3.0})
        else:
            self._send(404, {"error": "unknown path"})


class StubServer:
    """Context manager running the stub on an ephemeral port."""

    def __init__(self):
        self.httpd = ThreadingHTTPServer(("127.0.0.1", 0), _Handler)
        self.httpd.requests = []
        self.httpd.fail_next = 0
        self.httpd.status = 200
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.httpd.shutdown()
        self.httpd.server_close()

    @property
    def port(self):
        return self.httpd.server_address[1]

    @property
    def chat_url(self):
        return f"http://127.0.0.1:{self.port}/chat"

    @property
    def score_url(self):
        return f"http://127.0.0.1:{self.port}/score"

    @property
    def requests(self):
        return self.httpd.requests
