"""Serve the splitter over HTTP and delegate a stage to a generation server.

Starts the bridge (stub mode) on a local port, points a remote backend at
it, and runs a pipeline whose split stage happens over the wire. Needs the
bridge package installed:  pip install -e bridge/
Run with:  python3 demos/04_service_and_bridge.py
"""

import socket
import threading
import time

import uvicorn
from fastapi.testclient import TestClient

from genbridge.server import BridgeConfig, create_app as create_bridge_app
from querysplit import RemoteBackend, run_pipeline, two_stage_once_config
from querysplit.service import ServiceConfig, create_app as create_service_app

print("== the query service, in process ==")
client = TestClient(create_service_app(ServiceConfig()))
answer = client.post("/v1/split?trace=1", json={"query": "首先去北京然后订酒店"}).json()
print("sub_queries:", answer["sub_queries"])
print("stages:     ", [s["segments"] for s in answer["trace"]["stages"]])
print("health:     ", client.get("/v1/health").json())

print("\n== a generation server on a real socket ==")
probe = socket.socket()
probe.bind(("127.0.0.1", 0))
port = probe.getsockname()[1]
probe.close()
server = uvicorn.Server(
    uvicorn.Config(
        create_bridge_app(BridgeConfig()), host="127.0.0.1", port=port, log_level="error"
    )
)
thread = threading.Thread(target=server.run, daemon=True)
thread.start()
while not server.started:
    time.sleep(0.02)
url = f"http://127.0.0.1:{port}"
print(f"bridge listening on {url} (stub mode)")

remote = RemoteBackend(url)
print("remote healthy:", remote.is_healthy())

config = two_stage_once_config(split_executor="model", rewrite_executor="rule")
trace = run_pipeline(config, "先查天气再然后订一间酒店", {"model": remote})
print("split over the wire, rewrite locally:")
for snapshot in trace.snapshots:
    print(f"  stage {snapshot.stage_index}: {list(snapshot.segments)}")
print("final:", list(trace.final))

server.should_exit = True
thread.join(timeout=5)
