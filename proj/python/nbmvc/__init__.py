"""NBMVC workbench: projects, event scripts, code generation.

Thin wrapper over the compiled ``_nbmvc`` module that decodes its JSON
results into plain Python values.
"""

import json

from . import _nbmvc
from ._nbmvc import NbmvcError, domains

__all__ = ["NbmvcError", "Workspace", "Hub", "domains"]


def _script(lines):
    if isinstance(lines, str):
        return lines
    return "\n".join(line if isinstance(line, str) else json.dumps(line) for line in lines)


class Workspace:
    """A directory of projects."""

    def __init__(self, root):
        self._ws = _nbmvc.Workspace(str(root))

    @property
    def root(self):
        return self._ws.root()

    def create(self, name, domain):
        return json.loads(self._ws.create(name, domain))

    def list(self):
        return json.loads(self._ws.list())

    def remove(self, project):
        self._ws.remove(project)

    def apply(self, project, lines):
        """Run client messages (dicts or JSON lines) in one session; returns the replies."""
        return json.loads(self._ws.apply_script(project, _script(lines)))

    def validate(self, project):
        return json.loads(self._ws.validate(project))

    def export_code(self, project):
        return json.loads(self._ws.export_code(project))

    def eval_task(self, project, inputs):
        return json.loads(self._ws.eval_task(project, json.dumps(inputs)))

    def model(self, project):
        return json.loads(self._ws.model(project))

    def replay_matches(self, project):
        return self._ws.replay_matches(project)


class Hub:
    """Session channel without a socket: one message in, one reply out."""

    def __init__(self, workspace):
        self._hub = _nbmvc.Hub(workspace._ws)
        self._workspace = workspace

    def send(self, message):
        return json.loads(self._hub.handle(json.dumps(message)))

    def close(self, session):
        self._hub.close(session)

    def sessions(self):
        return self._hub.sessions()
