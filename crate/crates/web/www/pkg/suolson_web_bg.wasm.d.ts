/* tslint:disable */
/* eslint-disable */
export const memory: WebAssembly.Memory;
export const __wbg_energyhistory_free: (a: number, b: number) => void;
export const __wbg_heatmap_free: (a: number, b: number) => void;
export const __wbg_planesourcecomparison_free: (a: number, b: number) => void;
export const compare_plane_source: (a: number, b: number, c: number, d: number) => [number, number, number];
export const distribution_heatmap: (a: number, b: number, c: number, d: number, e: number, f: number, g: number) => [number, number, number];
export const energyhistory_advection: (a: number) => [number, number];
export const energyhistory_conservative: (a: number) => [number, number];
export const heatmap_n_cells: (a: number) => number;
export const heatmap_n_mu: (a: number) => number;
export const heatmap_rank: (a: number) => number;
export const heatmap_values: (a: number) => [number, number];
export const instability: (a: number, b: number) => [number, number, number];
export const planesourcecomparison_flux_difference: (a: number) => number;
export const planesourcecomparison_mass_drift_dlra: (a: number) => number;
export const planesourcecomparison_mass_drift_full: (a: number) => number;
export const planesourcecomparison_phi_dlra: (a: number) => [number, number];
export const planesourcecomparison_phi_full: (a: number) => [number, number];
export const planesourcecomparison_ranks: (a: number) => [number, number];
export const planesourcecomparison_times: (a: number) => [number, number];
export const planesourcecomparison_x: (a: number) => [number, number];
export const __wbindgen_externrefs: WebAssembly.Table;
export const __externref_table_dealloc: (a: number) => void;
export const __wbindgen_malloc: (a: number, b: number) => number;
export const __wbindgen_realloc: (a: number, b: number, c: number, d: number) => number;
export const __wbindgen_free: (a: number, b: number, c: number) => void;
export const __wbindgen_start: () => void;
