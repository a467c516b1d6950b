/* tslint:disable */
/* eslint-disable */

/**
 * Energy `0.5 |B v|_F^2` relative to its initial value, per step.
 */
export class EnergyHistory {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly advection: Float64Array;
    readonly conservative: Float64Array;
}

/**
 * `f(x, mu)` on `n_cells x n_mu` points, row-major with `mu` fastest.
 */
export class Heatmap {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    readonly n_cells: number;
    readonly n_mu: number;
    readonly rank: number;
    readonly values: Float64Array;
}

/**
 * Scalar flux of both solvers at `t_end` plus the rank history of the
 * low-rank run.
 */
export class PlaneSourceComparison {
    private constructor();
    free(): void;
    [Symbol.dispose](): void;
    /**
     * Relative L2 difference of the two scalar fluxes.
     */
    readonly flux_difference: number;
    readonly mass_drift_dlra: number;
    readonly mass_drift_full: number;
    readonly phi_dlra: Float64Array;
    readonly phi_full: Float64Array;
    readonly ranks: Float64Array;
    readonly times: Float64Array;
    readonly x: Float64Array;
}

/**
 * Plane source with the full solver and the low-rank solver side by side.
 */
export function compare_plane_source(n_cells: number, n_moments: number, theta: number, t_end: number): PlaneSourceComparison;

/**
 * Plane-source distribution `f(x, mu)` at time `t`.
 */
export function distribution_heatmap(solver: string, n_cells: number, n_moments: number, theta: number, t: number, n_mu: number): Heatmap;

/**
 * Advection-form and conservative energy on the same periodic setup.
 */
export function instability(periods: number, steps: number): EnergyHistory;

export type InitInput = RequestInfo | URL | Response | BufferSource | WebAssembly.Module;

export interface InitOutput {
    readonly memory: WebAssembly.Memory;
    readonly __wbg_energyhistory_free: (a: number, b: number) => void;
    readonly __wbg_heatmap_free: (a: number, b: number) => void;
    readonly __wbg_planesourcecomparison_free: (a: number, b: number) => void;
    readonly compare_plane_source: (a: number, b: number, c: number, d: number) => [number, number, number];
    readonly distribution_heatmap: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
    readonly energyhistory_advection: (a: number) => [number, number];
    readonly energyhistory_conservative: (a: number) => [number, number];
    readonly heatmap_n_cells: (a: number) => number;
    readonly heatmap_n_mu: (a: number) => number;
    readonly heatmap_rank: (a: number) => number;
    readonly heatmap_values: (a: number) => [number, number];
    readonly instability: (a: number, b: number) => [number, number, number];
    readonly planesourcecomparison_flux_difference: (a: number) => number;
    readonly planesourcecomparison_mass_drift_dlra: (a: number) => number;
    readonly planesourcecomparison_mass_drift_full: (a: number) => number;
    readonly planesourcecomparison_phi_dlra: (a: number) => [number, number];
    readonly planesourcecomparison_phi_full: (a: number) => [number, number];
    readonly planesourcecomparison_ranks: (a: number) => [number, number];
    readonly planesourcecomparison_times: (a: number) => [number, number];
    readonly planesourcecomparison_x: (a: number) => [number, number];
    readonly __wbindgen_externrefs: WebAssembly.Table;
    readonly __externref_table_dealloc: (a: number) => void;
    readonly __wbindgen_malloc: (a: number, b: number) => number;
    readonly __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
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
