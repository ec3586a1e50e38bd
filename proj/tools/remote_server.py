#!/usr/bin/env python3
"""HTTP encoder server for `cotbert --backend remote`.

Wraps a Hugging Face masked-language encoder (BERT-style, WordPiece vocab)
and answers the JSON protocol the C++ RemoteEncoder speaks:

  GET  /info       -> {"hidden_dim", "supports_position_ids", "trainable"}
  POST /forward    {"mode", "token_ids", "attention_mask", ["position_ids"]}
                   -> {"hidden": [batch][seq][dim], ["handle"]}
  POST /backward   {"handle", "grad": [batch][seq][dim]}
  POST /zero_grad  {}
  POST /step       {"optimizer": {"learning_rate", "beta1", "beta2", "epsilon", "weight_decay"}}
  POST /save       {"path"}
  POST /load       {"path"}

Failures come back as {"error": "..."} with HTTP 500.

  python tools/remote_server.py --model bert-base-uncased --port 8765
  cotbert train --backend remote --remote-url http://127.0.0.1:8765 \
      --vocab path/to/vocab.txt ...
"""

import argparse
import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import torch
import transformers


class EncoderState:
    def __init__(self, model, device):
        self.lock = threading.Lock()
        self.device = device
        self.set_model(model)

    def set_model(self, model):
        self.model = model.to(self.device)
        self.optimizer = None
        self.cache = {}
        self.next_handle = 0

    def info(self):
        return {
            "hidden_dim": self.model.config.hidden_size,
            "supports_position_ids": True,
            "trainable": True,
        }

    def forward(self, body):
        train = body.get("mode") == "train"
        self.model.train(train)
        ids = torch.tensor(body["token_ids"], dtype=torch.long, device=self.device)
        mask = torch.tensor(body["attention_mask"], dtype=torch.long, device=self.device)
        kwargs = {"input_ids": ids, "attention_mask": mask}
        if "position_ids" in body:
            kwargs["position_ids"] = torch.tensor(body["position_ids"], dtype=torch.long, device=self.device)
        if ids.numel() == 0:
            return {"hidden": []}
        with torch.set_grad_enabled(train):
            hidden = self.model(**kwargs).last_hidden_state
        reply = {"hidden": hidden.detach().double().cpu().tolist()}
        if train:
            handle = self.next_handle
            self.next_handle += 1
            self.cache[handle] = hidden
            reply["handle"] = handle
        return reply

    def backward(self, body):
        hidden = self.cache.pop(int(body["handle"]))
        grad = torch.tensor(body["grad"], dtype=hidden.dtype, device=self.device)
        hidden.backward(grad)
        return {}

    def zero_grad(self):
        self.model.zero_grad(set_to_none=True)
        self.cache.clear()
        return {}

    def step(self, body):
        o = body["optimizer"]
        if self.optimizer is None:
            self.optimizer = torch.optim.AdamW(
                self.model.parameters(),
                lr=o["learning_rate"],
                betas=(o["beta1"], o["beta2"]),
                eps=o["epsilon"],
                weight_decay=o["weight_decay"],
            )
        for group in self.optimizer.param_groups:
            group["lr"] = o["learning_rate"]
        self.optimizer.step()
        return {}

    def save(self, body):
        self.model.save_pretrained(body["path"])
        return {}

    def load(self, body):
        self.set_model(transformers.AutoModel.from_pretrained(body["path"]))
        return {}


def make_handler(state):
    class Handler(BaseHTTPRequestHandler):
        def log_message(self, fmt, *args):
            pass

        def reply(self, status, payload):
            data = json.dumps(payload).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def do_GET(self):
            if self.path == "/info":
                self.reply(200, state.info())
            else:
                self.reply(404, {"error": "unknown path " + self.path})

        def do_POST(self):
            routes = {
                "/forward": state.forward,
                "/backward": state.backward,
                "/zero_grad": lambda body: state.zero_grad(),
                "/step": state.step,
                "/save": state.save,
                "/load": state.load,
            }
            route = routes.get(self.path)
            if route is None:
                self.reply(404, {"error": "unknown path " + self.path})
                return
            try:
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with state.lock:
                    self.reply(200, route(body))
            except Exception as e:  # reported to the client as a numeric failure
                self.reply(500, {"error": f"{type(e).__name__}: {e}"})

    return Handler


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--model", help="Hugging Face model name or local directory")
    parser.add_argument("--random-init", metavar="CONFIG_JSON",
                        help="build an untrained BERT from this config instead of --model (for testing)")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8765)
    parser.add_argument("--device", default="cuda" if torch.cuda.is_available() else "cpu")
    parser.add_argument("--seed", type=int, default=42)
    args = parser.parse_args()

    torch.manual_seed(args.seed)
    if args.random_init:
        with open(args.random_init) as f:
            model = transformers.BertModel(transformers.BertConfig(**json.load(f)), add_pooling_layer=False)
    elif args.model:
        model = transformers.AutoModel.from_pretrained(args.model)
    else:
        parser.error("give --model or --random-init")

    state = EncoderState(model, args.device)
    server = ThreadingHTTPServer((args.host, args.port), make_handler(state))
    print(f"serving {args.model or 'random-init'} on http://{args.host}:{server.server_port}", flush=True)
    server.serve_forever()


if __name__ == "__main__":
    main()
