"""Task runtime: dependency DAGs over simulated heterogeneous devices.

Tasks carry kernels (host callbacks, QIR programs, or circuit payloads) and
are scheduled onto registered device backends by a configurable policy.
Submission and waiting may happen from any thread; state transitions are
serialized through one runtime lock, each device drains its queue on its own
worker thread, and completions wake the coordinator to promote dependents.

Data movement is modeled by DMEM objects with a clean/dirty coherence state
per location: a task reading an object on a device triggers a transfer only
when that device's copy is stale, and transfer counts are reported per task.

Determinism: kernels that sample take their seed from the kernel spec or,
when unset, derive it from (graph seed, task id), so payloads are identical
across scheduling policies and device counts.
"""

from __future__ import annotations

import enum
import graphlib
import itertools
import json
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .circuit import Circuit, Gate
from .qir import find_kernel_file, lower_to_circuit, output_positions, parse_qir
from .seeding import derive_seed
from .simulator import ProbDist, ShotHistogram, marginalize, sample_shots, simulate

ANY = "any"
HOST = "host"
QPU = "qpu"

POLICIES = ("default", "roundrobin", "explicit")

CycleError = graphlib.CycleError

_SHUTDOWN = object()


# --------------------------------------------------------------------------
# Kernel specs


@dataclass(frozen=True)
class HostKernel:
    """Registered host callback, invoked as fn(params, dep_payloads)."""

    name: str
    params: tuple = ()


@dataclass(frozen=True)
class QirKernel:
    """QIR program given as inline text or a .ll path; sampled unless shots=0."""

    source: str | None = None
    path: str | Path | None = None
    shots: int = 1024
    seed: int | None = None

    def __post_init__(self):
        if (self.source is None) == (self.path is None):
            raise ValueError("QirKernel needs exactly one of source or path")
        if self.shots < 0:
            raise ValueError("shots must be non-negative")


@dataclass(frozen=True)
class CircuitKernel:
    circuit: Circuit
    shots: int = 1024
    seed: int | None = None
    mode: str = "sampled"

    def __post_init__(self):
        if self.mode not in ("exact", "sampled"):
            raise ValueError(f"mode must be exact or sampled, got {self.mode!r}")
        if self.shots < 0:
            raise ValueError("shots must be non-negative")


@dataclass(frozen=True)
class NamedKernel:
    """Late-bound kernel: resolved at dispatch time. Names ending in .ll
    become QIR kernels and require a qpu-class device; anything else binds
    to a registered host kernel."""

    name: str
    shots: int = 1024
    params: tuple = ()
    seed: int | None = None


KernelSpec = HostKernel | QirKernel | CircuitKernel | NamedKernel


def resolve_kernel(kernel: KernelSpec) -> HostKernel | QirKernel | CircuitKernel:
    """Late binding: performed only when a device is about to execute."""
    if isinstance(kernel, NamedKernel):
        if kernel.name.endswith(".ll"):
            return QirKernel(path=kernel.name, shots=kernel.shots, seed=kernel.seed)
        return HostKernel(kernel.name, kernel.params)
    return kernel


def kernel_class_requirement(kernel: KernelSpec) -> str:
    if isinstance(kernel, (QirKernel, CircuitKernel)):
        return QPU
    if isinstance(kernel, HostKernel):
        return HOST
    return QPU if kernel.name.endswith(".ll") else HOST


# --------------------------------------------------------------------------
# Tasks and graphs


class TaskState(enum.Enum):
    CREATED = "created"
    SUBMITTED = "submitted"
    READY = "ready"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


TERMINAL_STATES = frozenset({TaskState.COMPLETED, TaskState.FAILED})

_ALLOWED_TRANSITIONS = {
    TaskState.CREATED: {TaskState.SUBMITTED},
    TaskState.SUBMITTED: {TaskState.READY, TaskState.FAILED},
    TaskState.READY: {TaskState.RUNNING, TaskState.FAILED},
    TaskState.RUNNING: {TaskState.COMPLETED, TaskState.FAILED},
}


@dataclass(frozen=True)
class TaskResult:
    status: TaskState
    payload: Any = None
    error: str | None = None
    device_id: int | None = None
    transfer_count: int = 0


class Task:
    def __init__(self, task_id, name, kernel, deps, device_req, reads, writes):
        self.id = task_id
        self.name = name
        self.kernel = kernel
        self.deps: frozenset[int] = frozenset(deps)
        self.device_req = device_req
        self.reads = tuple(reads)
        self.writes = tuple(writes)
        self.graph: "TaskGraph | None" = None
        self.state = TaskState.CREATED
        self.result: TaskResult | None = None
        self.assigned_device: int | None = None
        self.remaining_deps = 0
        self.running_seq: int | None = None
        self.terminal_seq: int | None = None

    def __repr__(self):
        return f"Task(id={self.id}, name={self.name!r}, state={self.state.value})"


class TaskGraph:
    def __init__(self, runtime: "Runtime", graph_id: int, seed: int):
        self._runtime = runtime
        self.graph_id = graph_id
        self.seed = seed
        self.tasks: dict[int, Task] = {}
        self._by_name: dict[str, int] = {}
        self.dependents: dict[int, list[int]] = {}
        self.policy = "default"
        self.rr_cursor = 0
        self.submitted = False
        self.trace: list[tuple[int, str, int, int | None]] = []
        self._seq = itertools.count()

    def create_task(
        self,
        name: str,
        kernel: KernelSpec | str,
        deps: Iterable[int] = (),
        device_req: str | int = ANY,
        reads: Iterable["MemObject"] = (),
        writes: Iterable["MemObject"] = (),
    ) -> int:
        """Add a task in Created state; returns its id."""
        if self.submitted:
            raise ValueError("graph already submitted")
        if name in self._by_name:
            raise ValueError(f"duplicate task name {name!r}")
        if isinstance(kernel, str):
            kernel = NamedKernel(kernel)
        if not isinstance(kernel, (HostKernel, QirKernel, CircuitKernel, NamedKernel)):
            raise ValueError(f"not a kernel spec: {kernel!r}")
        if not (device_req in (ANY, HOST, QPU) or isinstance(device_req, int)):
            raise ValueError(f"invalid device requirement {device_req!r}")
        deps = frozenset(deps)
        for d in deps:
            if d not in self.tasks:
                raise ValueError(f"unknown dependency id {d}")
        task_id = len(self.tasks)
        task = Task(task_id, name, kernel, deps, device_req, reads, writes)
        task.graph = self
        self.tasks[task_id] = task
        self._by_name[name] = task_id
        return task_id

    def task_id_by_name(self, name: str) -> int:
        return self._by_name[name]

    def derived_seed(self, task: Task) -> int:
        return derive_seed(self.seed, task.id)

    def all_terminal(self) -> bool:
        return all(t.state in TERMINAL_STATES for t in self.tasks.values())

    def _record(self, event: str, task: Task, device_id: int | None):
        self.trace.append((next(self._seq), event, task.id, device_id))


@dataclass
class GraphHandle:
    runtime: "Runtime"
    graph: TaskGraph

    def wait(self, timeout: float | None = None) -> dict[int, TaskResult]:
        return self.runtime.wait(self, timeout=timeout)

    def done(self) -> bool:
        with self.runtime._cond:
            return self.graph.all_terminal()


# --------------------------------------------------------------------------
# DMEM


class MemObject:
    """Runtime-managed buffer with a clean/dirty flag per location.

    At least one location holds a clean copy at all times; reads from a
    stale location copy from any clean one and count a transfer.
    """

    def __init__(self, obj_id: int, size: int):
        self.id = obj_id
        self.size = size
        self._host = bytes(size)
        self._host_clean = True
        self._device: dict[int, tuple[bytes, bool]] = {}
        self._alive = True
        self.transfer_count = 0

    def _check_alive(self):
        if not self._alive:
            raise ValueError(f"mem object {self.id} used after free")

    def _clean_source(self) -> bytes:
        if self._host_clean:
            return self._host
        for buf, clean in self._device.values():
            if clean:
                return buf
        raise RuntimeError(f"mem object {self.id} has no clean copy")

    def _ensure_clean_device(self, device_id: int) -> int:
        self._check_alive()
        entry = self._device.get(device_id)
        if entry is not None and entry[1]:
            return 0
        self._device[device_id] = (bytes(self._clean_source()), True)
        self.transfer_count += 1
        return 1

    def _ensure_clean_host(self) -> int:
        self._check_alive()
        if self._host_clean:
            return 0
        self._host = bytes(self._clean_source())
        self._host_clean = True
        self.transfer_count += 1
        return 1

    def _write_host(self, data: bytes):
        self._check_alive()
        if len(data) != self.size:
            raise ValueError(f"size mismatch: object holds {self.size} bytes, got {len(data)}")
        self._host = bytes(data)
        self._host_clean = True
        self._device = {d: (buf, False) for d, (buf, _) in self._device.items()}

    def _write_device(self, device_id: int, data: bytes):
        self._check_alive()
        if len(data) != self.size:
            raise ValueError(f"size mismatch: object holds {self.size} bytes, got {len(data)}")
        self._device = {d: (buf, False) for d, (buf, _) in self._device.items()}
        self._device[device_id] = (bytes(data), True)
        self._host_clean = False


# --------------------------------------------------------------------------
# Devices


class DeviceBackend:
    """In-process device worker: single queue, one task at a time."""

    device_class = ""
    supported_kinds: tuple = ()

    def __init__(self, device_id: int):
        self.id = device_id
        self.pending = 0  # assigned (queued or running), guarded by runtime lock
        self.running = 0
        self._queue: queue.SimpleQueue = queue.SimpleQueue()
        self._thread: threading.Thread | None = None

    def _start(self, runtime: "Runtime"):
        self._thread = threading.Thread(
            target=self._loop,
            args=(runtime,),
            daemon=True,
            name=f"{self.device_class}-device-{self.id}",
        )
        self._thread.start()

    def _loop(self, runtime: "Runtime"):
        while True:
            task = self._queue.get()
            if task is _SHUTDOWN:
                return
            runtime._execute_on(self, task)

    def _stop(self):
        self._queue.put(_SHUTDOWN)
        if self._thread is not None:
            self._thread.join(timeout=10)

    def run_kernel(self, task: Task, graph: TaskGraph, runtime: "Runtime"):
        raise NotImplementedError


def _task_seed(spec, graph: TaskGraph, task: Task) -> int:
    return spec.seed if spec.seed is not None else graph.derived_seed(task)


class QpuDevice(DeviceBackend):
    """Simulated QPU: executes QIR and circuit kernels on a statevector."""

    device_class = QPU
    supported_kinds = (QirKernel, CircuitKernel)

    def run_kernel(self, task, graph, runtime):
        spec = resolve_kernel(task.kernel)
        if isinstance(spec, QirKernel):
            if spec.source is not None:
                text = spec.source
            else:
                text = find_kernel_file(spec.path).read_text()
            prog = parse_qir(text)
            circuit = lower_to_circuit(prog)
            _, dist = simulate(circuit)
            positions = output_positions(prog)
            if positions is not None:
                dist = marginalize(dist, positions)
            if spec.shots == 0:
                return dist
            return sample_shots(dist, spec.shots, _task_seed(spec, graph, task))
        if isinstance(spec, CircuitKernel):
            _, dist = simulate(spec.circuit)
            if spec.mode == "exact":
                return dist
            return sample_shots(dist, spec.shots, _task_seed(spec, graph, task))
        raise RuntimeError(f"qpu device cannot run {type(spec).__name__}")


class HostDevice(DeviceBackend):
    """Host callback executor for registered classical kernels."""

    device_class = HOST
    supported_kinds = (HostKernel,)

    def run_kernel(self, task, graph, runtime):
        spec = resolve_kernel(task.kernel)
        if not isinstance(spec, HostKernel):
            raise RuntimeError(f"host device cannot run {type(spec).__name__}")
        fn = runtime._host_kernels.get(spec.name)
        if fn is None:
            raise RuntimeError(f"unknown-kernel: {spec.name!r} is not registered")
        deps = {
            graph.tasks[d].name: graph.tasks[d].result.payload for d in sorted(task.deps)
        }
        return fn(spec.params, deps)


# --------------------------------------------------------------------------
# Scheduling


def _req_allows(req, device: DeviceBackend) -> bool:
    if req == ANY:
        return True
    if isinstance(req, int):
        return device.id == req
    return device.device_class == req


def _capable(device: DeviceBackend, task: Task) -> bool:
    return device.device_class == kernel_class_requirement(task.kernel) and _req_allows(
        task.device_req, device
    )


def schedule_next(
    ready: Sequence[Task],
    devices: Sequence[DeviceBackend],
    policy: str,
    rr_cursor: int,
) -> tuple[list[tuple[Task, DeviceBackend | None]], int]:
    """Pure assignment decision for the currently ready tasks.

    Returns (assignments, new round-robin cursor). A None device marks a
    task with no capable device at all, to be failed; tasks absent from the
    list stay queued until a later dispatch. ``default`` picks the lowest-id
    capable idle device; ``roundrobin`` cycles a cursor over capable devices
    regardless of occupancy (queues drain in dispatch order); explicit
    integer requirements pin the task under every policy.
    """
    assignments: list[tuple[Task, DeviceBackend | None]] = []
    cursor = rr_cursor
    claimed: set[int] = set()
    for task in ready:
        caps = [d for d in devices if _capable(d, task)]
        if not caps:
            assignments.append((task, None))
            continue
        if isinstance(task.device_req, int):
            assignments.append((task, caps[0]))
            continue
        if policy == "roundrobin":
            assignments.append((task, caps[cursor % len(caps)]))
            cursor += 1
            continue
        idle = [d for d in caps if d.pending == 0 and d.id not in claimed]
        if idle:
            device = min(idle, key=lambda d: d.id)
            claimed.add(device.id)
            assignments.append((task, device))
    return assignments, cursor


# --------------------------------------------------------------------------
# Runtime


class Runtime:
    """Coordinator owning devices, host-kernel registry, and DMEM objects."""

    def __init__(self):
        self._lock = threading.Lock()
        self._cond = threading.Condition(self._lock)
        self._devices: dict[int, DeviceBackend] = {}
        self._host_kernels: dict[str, Callable] = {}
        self._graph_count = itertools.count()
        self._mem_count = itertools.count()
        self._active: list[TaskGraph] = []
        self._closed = False

    # -- registries

    def register_device(self, backend: DeviceBackend) -> int:
        with self._cond:
            if backend.id in self._devices:
                raise ValueError(f"duplicate device id {backend.id}")
            self._devices[backend.id] = backend
        backend._start(self)
        return backend.id

    @property
    def devices(self) -> list[DeviceBackend]:
        return list(self._devices.values())

    def register_host_kernel(self, name: str, fn: Callable) -> None:
        with self._cond:
            if name in self._host_kernels:
                raise ValueError(f"host kernel {name!r} already registered")
            self._host_kernels[name] = fn

    def has_host_kernel(self, name: str) -> bool:
        return name in self._host_kernels

    # -- graphs

    def create_graph(self, seed: int = 0) -> TaskGraph:
        return TaskGraph(self, next(self._graph_count), seed)

    def submit(self, graph: TaskGraph, policy: str = "default", sync: bool = False) -> GraphHandle:
        """Mark all tasks Submitted, promote dependency-free ones, dispatch.

        A cycle is rejected before any task changes state. With sync=True the
        call blocks until the graph is terminal.
        """
        if policy not in POLICIES:
            raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")
        if graph._runtime is not self:
            raise ValueError("graph belongs to a different runtime")
        with self._cond:
            if self._closed:
                raise ValueError("runtime is shut down")
            if graph.submitted:
                raise ValueError("graph already submitted")
            sorter = graphlib.TopologicalSorter(
                {tid: set(t.deps) for tid, t in graph.tasks.items()}
            )
            sorter.prepare()  # raises graphlib.CycleError before any state change

            graph.submitted = True
            graph.policy = policy
            graph.dependents = {tid: [] for tid in graph.tasks}
            for task in graph.tasks.values():
                self._set_state(task, TaskState.SUBMITTED)
                task.remaining_deps = len(task.deps)
                for d in task.deps:
                    graph.dependents[d].append(task.id)
            self._active.append(graph)
            for task in graph.tasks.values():
                if task.remaining_deps == 0:
                    self._set_state(task, TaskState.READY)
            self._dispatch_graph(graph)
            self._cond.notify_all()
        handle = GraphHandle(self, graph)
        if sync:
            self.wait(handle)
        return handle

    def wait(self, handle: GraphHandle, timeout: float | None = None) -> dict[int, TaskResult]:
        """Block until the graph is terminal; idempotent.

        With a timeout, returns a snapshot of the results produced so far.
        """
        graph = handle.graph
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while not graph.all_terminal():
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    break
                self._cond.wait(remaining)
            return {
                tid: t.result for tid, t in graph.tasks.items() if t.result is not None
            }

    # -- DMEM

    def dmem_create(self, nbytes: int) -> MemObject:
        if nbytes < 0:
            raise ValueError("size must be non-negative")
        return MemObject(next(self._mem_count), nbytes)

    def dmem_write_host(self, obj: MemObject, data: bytes) -> None:
        with self._cond:
            obj._write_host(data)

    def dmem_read_host(self, obj: MemObject) -> bytes:
        with self._cond:
            obj._ensure_clean_host()
            return obj._host

    def dmem_free(self, obj: MemObject) -> None:
        with self._cond:
            obj._check_alive()
            obj._alive = False

    # -- lifecycle

    def shutdown(self):
        with self._cond:
            if self._closed:
                return
            self._closed = True
            devices = list(self._devices.values())
        for d in devices:
            d._stop()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.shutdown()
        return False

    # -- internals (these run under self._cond unless noted)

    def _set_state(self, task: Task, new: TaskState):
        allowed = _ALLOWED_TRANSITIONS.get(task.state, frozenset())
        if new not in allowed:
            raise AssertionError(
                f"illegal transition {task.state.value} -> {new.value} for {task!r}"
            )
        task.state = new

    def _dispatch_all(self):
        for graph in list(self._active):
            if graph.all_terminal():
                self._active.remove(graph)
                continue
            self._dispatch_graph(graph)

    def _dispatch_graph(self, graph: TaskGraph):
        ready = [
            t
            for t in graph.tasks.values()
            if t.state is TaskState.READY and t.assigned_device is None
        ]
        if not ready:
            return
        devices = list(self._devices.values())
        assignments, graph.rr_cursor = schedule_next(
            ready, devices, graph.policy, graph.rr_cursor
        )
        for task, device in assignments:
            if device is None:
                self._fail_task(graph, task, None, "no-capable-device", 0)
                continue
            task.assigned_device = device.id
            device.pending += 1
            device._queue.put(task)

    def _complete_task(self, graph: TaskGraph, task: Task, device, payload, transfers):
        self._set_state(task, TaskState.COMPLETED)
        task.terminal_seq = next(graph._seq)
        task.result = TaskResult(
            TaskState.COMPLETED,
            payload=payload,
            device_id=device.id,
            transfer_count=transfers,
        )
        graph._record("completed", task, device.id)
        for dep_id in graph.dependents.get(task.id, ()):
            dependent = graph.tasks[dep_id]
            dependent.remaining_deps -= 1
            if dependent.remaining_deps == 0 and dependent.state is TaskState.SUBMITTED:
                self._set_state(dependent, TaskState.READY)

    def _fail_task(self, graph: TaskGraph, task: Task, device, error: str, transfers: int):
        self._set_state(task, TaskState.FAILED)
        task.terminal_seq = next(graph._seq)
        task.result = TaskResult(
            TaskState.FAILED,
            error=error,
            device_id=None if device is None else device.id,
            transfer_count=transfers,
        )
        graph._record("failed", task, None if device is None else device.id)
        # fail-fast: transitive dependents never run
        stack = list(graph.dependents.get(task.id, ()))
        while stack:
            dep_id = stack.pop()
            dependent = graph.tasks[dep_id]
            if dependent.state in TERMINAL_STATES:
                continue
            self._set_state(dependent, TaskState.FAILED)
            dependent.terminal_seq = next(graph._seq)
            dependent.result = TaskResult(TaskState.FAILED, error="dependency-failed")
            graph._record("failed", dependent, None)
            stack.extend(graph.dependents.get(dep_id, ()))

    def _prepare_reads(self, task: Task, device: DeviceBackend) -> int:
        if not task.reads:
            return 0
        with self._cond:
            return sum(obj._ensure_clean_device(device.id) for obj in task.reads)

    def _commit_writes(self, task: Task, device: DeviceBackend, payload):
        if not task.writes:
            return
        if not isinstance(payload, (bytes, bytearray)):
            raise RuntimeError("tasks declaring writes must return a bytes payload")
        with self._cond:
            for obj in task.writes:
                obj._write_device(device.id, bytes(payload))

    def _execute_on(self, device: DeviceBackend, task: Task):
        # runs on the device worker thread
        graph = task.graph
        with self._cond:
            self._set_state(task, TaskState.RUNNING)
            task.running_seq = next(graph._seq)
            device.running += 1
            if device.running != 1:
                raise AssertionError(f"device {device.id} double occupancy")
            graph._record("running", task, device.id)
        transfers = 0
        try:
            transfers = self._prepare_reads(task, device)
            payload = device.run_kernel(task, graph, self)
            self._commit_writes(task, device, payload)
        except Exception as exc:  # failures are results, not crashes
            with self._cond:
                device.running -= 1
                device.pending -= 1
                self._fail_task(graph, task, device, f"{type(exc).__name__}: {exc}", transfers)
                self._dispatch_all()
                self._cond.notify_all()
            return
        with self._cond:
            device.running -= 1
            device.pending -= 1
            self._complete_task(graph, task, device, payload, transfers)
            self._dispatch_all()
            self._cond.notify_all()


def make_runtime(qpu: int = 1, host: int = 1) -> Runtime:
    """Runtime with qpu devices ids 0..qpu-1 and host devices after them."""
    runtime = Runtime()
    next_id = 0
    for _ in range(qpu):
        runtime.register_device(QpuDevice(next_id))
        next_id += 1
    for _ in range(host):
        runtime.register_device(HostDevice(next_id))
        next_id += 1
    return runtime


# --------------------------------------------------------------------------
# Graph JSON


class GraphSpecError(ValueError):
    pass


@dataclass
class TaskSpecEntry:
    name: str
    kernel: KernelSpec
    depends: tuple[str, ...]
    device: str | int


@dataclass
class GraphSpec:
    seed: int
    policy: str
    qpu: int
    host: int
    tasks: list[TaskSpecEntry]


_TOP_FIELDS = {"seed", "policy", "devices", "tasks"}
_DEVICE_FIELDS = {"qpu", "host"}
_TASK_FIELDS = {"name", "kernel", "shots", "depends", "device"}
_KERNEL_FIELDS = {
    "qir": {"type", "file", "source"},
    "host": {"type", "name", "params"},
    "circuit": {"type", "qubits", "gates", "mode"},
}

_JSON_GATES: dict[str, tuple[Callable, int]] = {
    "h": (Gate.h, 1),
    "x": (Gate.x, 1),
    "y": (Gate.y, 1),
    "z": (Gate.z, 1),
    "s": (Gate.s, 1),
    "sdg": (Gate.sdg, 1),
    "t": (Gate.t, 1),
    "tdg": (Gate.tdg, 1),
    "rx": (Gate.rx, 2),
    "ry": (Gate.ry, 2),
    "rz": (Gate.rz, 2),
    "cnot": (Gate.cnot, 2),
    "cz": (Gate.cz, 2),
    "mz": (Gate.mz, 2),
}


def _reject_unknown(obj: Mapping, allowed: set[str], where: str):
    for key in obj:
        if key not in allowed:
            raise GraphSpecError(f"unknown field {key!r} in {where}")


def _json_circuit(spec: Mapping, where: str) -> Circuit:
    qubits = spec.get("qubits")
    if not isinstance(qubits, int) or qubits < 1:
        raise GraphSpecError(f"circuit kernel in {where} needs a positive 'qubits'")
    circuit = Circuit(qubits)
    for entry in spec.get("gates", []):
        if not isinstance(entry, list) or not entry or entry[0] not in _JSON_GATES:
            raise GraphSpecError(f"bad gate entry {entry!r} in {where}")
        ctor, arity = _JSON_GATES[entry[0]]
        args = entry[1:]
        if len(args) != arity:
            raise GraphSpecError(
                f"gate {entry[0]!r} in {where} expects {arity} argument(s), got {len(args)}"
            )
        try:
            circuit.append(ctor(*args))
        except (TypeError, ValueError) as exc:
            raise GraphSpecError(f"bad gate entry {entry!r} in {where}: {exc}") from exc
    return circuit


def _json_kernel(spec, shots: int, where: str) -> KernelSpec:
    if not isinstance(spec, Mapping):
        raise GraphSpecError(f"kernel in {where} must be an object")
    ktype = spec.get("type")
    if ktype not in _KERNEL_FIELDS:
        raise GraphSpecError(
            f"kernel in {where} has unknown type {ktype!r}; expected qir, host, or circuit"
        )
    _reject_unknown(spec, _KERNEL_FIELDS[ktype], f"{where} kernel")
    if ktype == "qir":
        file, source = spec.get("file"), spec.get("source")
        if (file is None) == (source is None):
            raise GraphSpecError(f"qir kernel in {where} needs exactly one of file or source")
        return QirKernel(source=source, path=file, shots=shots)
    if ktype == "host":
        name = spec.get("name")
        if not isinstance(name, str):
            raise GraphSpecError(f"host kernel in {where} needs a string 'name'")
        params = spec.get("params", [])
        if not isinstance(params, list):
            raise GraphSpecError(f"host kernel params in {where} must be a list")
        return HostKernel(name, tuple(params))
    mode = spec.get("mode", "sampled")
    if mode not in ("exact", "sampled"):
        raise GraphSpecError(f"circuit kernel mode in {where} must be exact or sampled")
    return CircuitKernel(_json_circuit(spec, where), shots=shots, mode=mode)


def parse_graph_spec(text: str) -> GraphSpec:
    """Validate and load the graph JSON format. Unknown fields are rejected."""
    obj = json.loads(text)
    if not isinstance(obj, Mapping):
        raise GraphSpecError("graph spec must be a JSON object")
    _reject_unknown(obj, _TOP_FIELDS, "graph spec")

    seed = obj.get("seed", 0)
    if not isinstance(seed, int):
        raise GraphSpecError("'seed' must be an integer")
    policy = obj.get("policy", "default")
    if policy not in ("default", "roundrobin"):
        raise GraphSpecError(f"'policy' must be default or roundrobin, got {policy!r}")

    devices = obj.get("devices")
    if not isinstance(devices, Mapping):
        raise GraphSpecError("missing or invalid 'devices' object")
    _reject_unknown(devices, _DEVICE_FIELDS, "devices")
    qpu = devices.get("qpu", 0)
    host = devices.get("host", 0)
    if not all(isinstance(v, int) and v >= 0 for v in (qpu, host)):
        raise GraphSpecError("device counts must be non-negative integers")

    raw_tasks = obj.get("tasks")
    if not isinstance(raw_tasks, list):
        raise GraphSpecError("missing or invalid 'tasks' list")

    names: set[str] = set()
    entries: list[TaskSpecEntry] = []
    for i, raw in enumerate(raw_tasks):
        where = f"task #{i}"
        if not isinstance(raw, Mapping):
            raise GraphSpecError(f"{where} must be an object")
        _reject_unknown(raw, _TASK_FIELDS, where)
        name = raw.get("name")
        if not isinstance(name, str) or not name:
            raise GraphSpecError(f"{where} needs a non-empty string 'name'")
        if name in names:
            raise GraphSpecError(f"duplicate task name {name!r}")
        names.add(name)
        where = f"task {name!r}"
        shots = raw.get("shots", 1024)
        if not isinstance(shots, int) or shots < 0:
            raise GraphSpecError(f"'shots' in {where} must be a non-negative integer")
        depends = raw.get("depends", [])
        if not isinstance(depends, list) or not all(isinstance(d, str) for d in depends):
            raise GraphSpecError(f"'depends' in {where} must be a list of task names")
        device = raw.get("device", ANY)
        if not (device in (ANY, HOST, QPU) or isinstance(device, int)):
            raise GraphSpecError(f"'device' in {where} must be any, qpu, host, or an id")
        kernel = _json_kernel(raw.get("kernel"), shots, where)
        entries.append(TaskSpecEntry(name, kernel, tuple(depends), device))

    for entry in entries:
        for dep in entry.depends:
            if dep not in names:
                raise GraphSpecError(
                    f"task {entry.name!r} depends on unknown task {dep!r}"
                )

    return GraphSpec(seed=seed, policy=policy, qpu=qpu, host=host, tasks=entries)
