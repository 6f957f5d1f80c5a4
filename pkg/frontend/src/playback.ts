// Playback state shared by both panes: one step counter, one play flag,
// one speed multiplier. All transitions return a new state object.

export interface PlaybackState {
  step: number;
  playing: boolean;
  speed: number;
  nSteps: number;
  // fractional step accumulator so slow speeds still advance
  phase: number;
}

export function createPlayback(nSteps: number): PlaybackState {
  if (!Number.isInteger(nSteps) || nSteps < 1) {
    throw new RangeError(`nSteps must be a positive integer, got ${nSteps}`);
  }
  return { step: 0, playing: false, speed: 1, nSteps, phase: 0 };
}

export function setStep(state: PlaybackState, step: number): PlaybackState {
  const clamped = Math.min(Math.max(Math.trunc(step), 0), state.nSteps - 1);
  return { ...state, step: clamped, phase: 0 };
}

export function setPlaying(state: PlaybackState, playing: boolean): PlaybackState {
  return { ...state, playing };
}

export function setSpeed(state: PlaybackState, speed: number): PlaybackState {
  if (!(speed > 0) || !Number.isFinite(speed)) {
    throw new RangeError(`speed must be positive, got ${speed}`);
  }
  return { ...state, speed };
}

/** Advance by wall-clock elapsed seconds: one step per dt/speed seconds,
 * looping past the last step. Paused states pass through unchanged. */
export function tick(state: PlaybackState, elapsedSeconds: number, dt: number): PlaybackState {
  if (!state.playing || !(elapsedSeconds > 0) || !(dt > 0)) return state;
  const phase = state.phase + (elapsedSeconds * state.speed) / dt;
  const advance = Math.floor(phase);
  if (advance === 0) return { ...state, phase };
  return {
    ...state,
    step: (state.step + advance) % state.nSteps,
    phase: phase - advance,
  };
}
