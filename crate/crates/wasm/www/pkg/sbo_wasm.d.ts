/* tslint:disable */
/* eslint-disable */

export class Simulation {
    free(): void;
    [Symbol.dispose](): void;
    /**
     * `[E1, E2, E3, H]`.
     */
    conserved(): Float64Array;
    /**
     * Starts from a Gibbs-style draw with cutoff `b`.
     */
    constructor(n_max: number, alpha: number, beta: number, gamma: number, b: number, dt: number, seed: bigint);
    /**
     * `|u|²` then `v` on `points` equispaced nodes.
     */
    profiles(points: number): Float64Array;
    step(steps: number): void;
    time(): number;
}

/**
 * Log-log points `(ln cap, ln sup)` of the multiplier over `A` or its complement.
 */
export function multiplier_scan(s: number, gamma: number, complement: boolean, caps: BigInt64Array): Float64Array;

/**
 * Flattened `(N, n1, |Q|, verified)` rows of the near-resonance search.
 */
export function near_resonances(gamma: number, n_cap: bigint): Float64Array;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_simulation_free: (a: number, b: number) => void;
    readonly multiplier_scan: (a: number, b: number, c: number, d: number, e: number) => [number, number, number, number];
    readonly near_resonances: (a: number, b: bigint) => [number, number, number, number];
    readonly simulation_conserved: (a: number) => [number, number, number, number];
    readonly simulation_new: (a: number, b: number, c: number, d: number, e: number, f: number, g: bigint) => [number, number, number];
    readonly simulation_profiles: (a: number, b: number) => [number, number, number, number];
    readonly simulation_step: (a: number, b: number) => [number, number];
    readonly simulation_time: (a: number) => number;
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_free: (a: number, b: number, c: number) => void;
    readonly __wbindgen_start: () => void;
}

export type SyncInitInput = BufferSource | WebAssembly.Module;

/**
 * Instantiates the given `module`, which can either be bytes or
 * a precompiled `WebAssembly.Module`.
 *
 * @param {{ module: SyncInitInput }} module - Passing `SyncInitInput` directly is deprecated.
 *
 * @returns {InitOutput}
 */
export function initSync(module: { module: SyncInitInput } | SyncInitInput): InitOutput;

/**
 * If `module_or_path` is {RequestInfo} or {URL}, makes a request and
 * for everything else, calls `WebAssembly.instantiate` directly.
 *
 * @param {{ module_or_path: InitInput | Promise<InitInput> }} module_or_path - Passing `InitInput` directly is deprecated.
 *
 * @returns {Promise<InitOutput>}
 */
export default function __wbg_init (module_or_path?: { module_or_path: InitInput | Promise<InitInput> } | InitInput | Promise<InitInput>): Promise<InitOutput>;
