"""Static adversaries: echo, uniform random, their mixture, and replay."""

from ..engine import ABORT


class Adversary:
    """Chooses the next stream item from the transcript so far.

    ``reset`` is called at the start of every game with the instance and a
    private generator; ``next_input`` returns an item in 1..n, or None to
    end the stream early; ``finish`` sees the final transcript.
    """

    kind = "adversary"
    deterministic = True

    def reset(self, inst, rng):
        self.n = inst.n
        self.rng = rng

    def next_input(self, transcript):
        raise NotImplementedError

    def finish(self, transcript):
        pass


class Echo(Adversary):
    kind = "echo"

    def next_input(self, transcript):
        last = transcript.last_output
        if last is ABORT:
            raise RuntimeError("game already ended")
        return 1 if last is None else last


class UniformFresh(Adversary):
    """Uniform over items neither input before nor equal to the current output."""

    kind = "random"
    deterministic = False

    def next_input(self, transcript):
        excluded = set(transcript.inputs)
        if transcript.outputs:
            excluded.add(transcript.last_output)
        free = self.n - sum(1 for v in excluded if v is not ABORT)
        if free <= 0:
            return int(self.rng.integers(1, self.n + 1))
        if free * 4 >= self.n:
            while True:
                item = int(self.rng.integers(1, self.n + 1))
                if item not in excluded:
                    return item
        pool = [v for v in range(1, self.n + 1) if v not in excluded]
        return pool[int(self.rng.integers(len(pool)))]


class Mixed(Adversary):
    kind = "mixed"
    deterministic = False

    def __init__(self, p_echo):
        if not 0.0 <= p_echo <= 1.0:
            raise ValueError("p_echo must lie in [0, 1]")
        self.p_echo = p_echo
        self._echo = Echo()
        self._random = UniformFresh()

    def reset(self, inst, rng):
        super().reset(inst, rng)
        self._echo.reset(inst, rng)
        self._random.reset(inst, rng)

    def next_input(self, transcript):
        if self.rng.random() < self.p_echo:
            return self._echo.next_input(transcript)
        return self._random.next_input(transcript)


class Replay(Adversary):
    """Feeds a fixed stream regardless of the outputs."""

    kind = "replay"

    def __init__(self, stream):
        self.stream = list(stream)

    def next_input(self, transcript):
        k = len(transcript)
        return self.stream[k] if k < len(self.stream) else None


class Policy(Adversary):
    """Deterministic adaptive adversary from a function of the output history."""

    kind = "policy"

    def __init__(self, choose):
        self.choose = choose

    def next_input(self, transcript):
        return self.choose(tuple(transcript.outputs))


def echo_adversary():
    return Echo()


def random_adversary():
    return UniformFresh()


def mixed_adversary(p_echo):
    return Mixed(p_echo)


def replay_adversary(stream):
    return Replay(stream)
