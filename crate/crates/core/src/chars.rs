//! Characters of the abelian subgroups of U_h^{2,q}(F_{q²}), their extensions
//! to the stabilizer subgroups, Frobenius-formula induction (computed per
//! conjugacy class), the closed-form traces of the induced irreducibles, the
//! virtual decomposition over H, and the trace of the semidirect extension at
//! a multiplicative generator ζ.

use crate::cyclo::{CycCtx, CycInt, Rat};
use crate::error::{Error, Result};
use crate::gf::FieldElement;
use crate::unipotent::{GroupCtx, Subgroup, SubgroupName, Uv};
use std::collections::HashMap;
use std::sync::Arc;

/// Additive character ψ_b(x) = ζ_p^{Tr_{F_{q²}/F_p}(b·x)} of F_{q²}.
#[derive(Clone, Debug)]
pub struct AddChar {
    pub b: FieldElement,
    /// trace value per level-0 element index, as an exponent of ζ_p
    table: Vec<u8>,
}

impl AddChar {
    pub fn new(g: &GroupCtx, b: FieldElement) -> AddChar {
        let gf = &g.gf;
        assert_eq!(b.level, 0);
        let table = (0..g.q2)
            .map(|i| {
                let x = gf.elem_from_index(0, i);
                let t = gf
                    .trace_to(&gf.mul(&b, &x), crate::gf::Subfield::Prime)
                    .unwrap();
                t.c[0]
            })
            .collect();
        AddChar { b, table }
    }

    /// Exponent of ζ_p at the element with the given level-0 index.
    #[inline]
    pub fn exp_at(&self, idx: u16) -> u8 {
        self.table[idx as usize]
    }

    /// 2 when some x has ψ(x^q) ≠ ψ(x), else 1.
    pub fn conductor(&self, g: &GroupCtx) -> u8 {
        let acc = g.gf.accel(0).unwrap();
        for i in 0..g.q2 as u16 {
            if self.table[acc.frob_q[i as usize] as usize] != self.table[i as usize] {
                return 2;
            }
        }
        1
    }

    /// ψ(x + y) = ψ(x)ψ(y) holds by linearity of the trace; checked cheaply.
    pub fn is_additive(&self, g: &GroupCtx) -> bool {
        let acc = g.gf.accel(0).unwrap();
        let p = g.gf.p as u16;
        (0..g.q2 as u16).all(|i| {
            (0..g.q2 as u16).all(|j| {
                let s = acc.add_i(i as u32, j as u32) as usize;
                (self.table[i as usize] as u16 + self.table[j as usize] as u16) % p
                    == self.table[s] as u16
            })
        })
    }
}

/// First b (canonical order) outside F_q; gives a conductor-q² character.
pub fn canonical_psi(g: &GroupCtx) -> AddChar {
    let acc = g.gf.accel(0).unwrap();
    let b = (0..g.q2).find(|&i| !acc.in_fq[i as usize]).unwrap();
    AddChar::new(g, g.gf.elem_from_index(0, b))
}

/// Independent generators with their orders and a full coordinate table for
/// an abelian subgroup over F_{q²}.
pub struct AbelianBasis {
    pub sub: Subgroup,
    pub elems: Vec<u64>,
    pub gens: Vec<u64>,
    pub orders: Vec<u64>,
    /// position of an element id, u32::MAX if not a member
    pos_of_id: Vec<u32>,
    /// coordinates per position, rank entries each
    coords: Vec<u32>,
    pub rank: usize,
}

impl AbelianBasis {
    pub fn pos(&self, id: u64) -> Option<u32> {
        let p = self.pos_of_id[id as usize];
        (p != u32::MAX).then_some(p)
    }
    pub fn coords_at(&self, pos: u32) -> &[u32] {
        &self.coords[pos as usize * self.rank..(pos as usize + 1) * self.rank]
    }
    pub fn size(&self) -> u64 {
        self.elems.len() as u64
    }
    pub fn exponent(&self) -> u64 {
        self.orders.iter().fold(1u64, |a, &b| lcm(a, b))
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    let (mut a, mut b) = (a, b);
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}
fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

fn order_of(mult: &dyn Fn(u64, u64) -> u64, x: u64) -> u64 {
    let mut n = 1;
    let mut cur = x;
    while cur != 0 {
        cur = mult(cur, x);
        n += 1;
    }
    n
}

fn pow_of(mult: &dyn Fn(u64, u64) -> u64, x: u64, e: u64) -> u64 {
    let mut acc = 0u64;
    for _ in 0..e {
        acc = mult(acc, x);
    }
    acc
}

/// Basis of a finite abelian p-group (identity = 0) given by a multiplication
/// map, by repeatedly splitting off a maximal-order cyclic direct factor.
fn basis_rec(elems: &[u64], mult: &dyn Fn(u64, u64) -> u64) -> (Vec<u64>, Vec<u64>) {
    if elems.len() == 1 {
        return (Vec::new(), Vec::new());
    }
    let mut best = (0u64, 1u64);
    for &e in elems {
        let o = order_of(mult, e);
        if o > best.1 {
            best = (e, o);
        }
    }
    let (gen, ord) = best;
    let gpow: Vec<u64> = (0..ord).map(|k| pow_of(mult, gen, k)).collect();
    // quotient by ⟨gen⟩: coset representative = minimum of the coset
    let mut rep: HashMap<u64, u64> = HashMap::new();
    for &e in elems {
        let r = gpow.iter().map(|&p| mult(e, p)).min().unwrap();
        rep.insert(e, r);
    }
    let mut quot: Vec<u64> = rep.values().copied().collect();
    quot.sort_unstable();
    quot.dedup();
    let qmult = |a: u64, b: u64| rep[&mult(a, b)];
    let (qgens, qorders) = basis_rec(&quot, &qmult);
    let mut gens = vec![gen];
    let mut orders = vec![ord];
    for (&h, &m) in qgens.iter().zip(qorders.iter()) {
        // lift: h^m ∈ ⟨gen⟩; adjust so the lift has exact order m
        let hm = pow_of(mult, h, m);
        let t = gpow.iter().position(|&p| p == hm).unwrap() as u64;
        assert_eq!(t % m, 0, "lifting obstruction in abelian basis");
        let u = t / m;
        let adj = mult(h, pow_of(mult, gen, (ord - u) % ord));
        debug_assert_eq!(pow_of(mult, adj, m), 0);
        gens.push(adj);
        orders.push(m);
    }
    (gens, orders)
}

impl AbelianBasis {
    pub fn build(g: &GroupCtx, sub: &Subgroup) -> Result<AbelianBasis> {
        let uvs = g.enumerate(sub);
        let elems: Vec<u64> = uvs.iter().map(|v| g.uv_to_id(v)).collect();
        // abelian check: all pairs commute
        for (i, a) in uvs.iter().enumerate() {
            for b in uvs.iter().skip(i + 1) {
                if g.mul_uv(a, b) != g.mul_uv(b, a) {
                    return Err(Error::NotAbelian);
                }
            }
        }
        let mult = |a: u64, b: u64| g.uv_to_id(&g.mul_uv(&g.id_to_uv(a), &g.id_to_uv(b)));
        let (gens, orders) = basis_rec(&elems, &mult);
        let rank = gens.len();
        let total: u64 = orders.iter().product::<u64>().max(1);
        assert_eq!(total, elems.len() as u64, "basis orders must multiply to |S|");
        // coordinate table by full closure
        let n_all = g.order() as usize;
        let mut pos_of_id = vec![u32::MAX; n_all];
        for (i, &e) in elems.iter().enumerate() {
            pos_of_id[e as usize] = i as u32;
        }
        let mut coords = vec![0u32; elems.len() * rank.max(1)];
        let mut seen = vec![false; elems.len()];
        let mut exps = vec![0u64; rank];
        loop {
            // element for current exponent tuple
            let mut cur = 0u64;
            for (i, &e) in exps.iter().enumerate() {
                cur = mult(cur, pow_of(&mult, gens[i], e));
            }
            let pos = pos_of_id[cur as usize] as usize;
            assert!(!seen[pos], "coordinate closure revisited an element");
            seen[pos] = true;
            for (i, &e) in exps.iter().enumerate() {
                coords[pos * rank + i] = e as u32;
            }
            // next tuple
            let mut k = 0;
            loop {
                if k == rank {
                    assert!(seen.iter().all(|&s| s));
                    return Ok(AbelianBasis {
                        sub: sub.clone(),
                        elems,
                        gens,
                        orders,
                        pos_of_id,
                        coords,
                        rank,
                    });
                }
                exps[k] += 1;
                if exps[k] < orders[k] {
                    break;
                }
                exps[k] = 0;
                k += 1;
            }
        }
    }
}

/// Linear character of an abelian subgroup, stored as exponents against the
/// computed basis: χ(gen_i) = ζ_M^{(M/order_i)·exps_i}.
#[derive(Clone)]
pub struct Character {
    pub basis: Arc<AbelianBasis>,
    pub exps: Vec<u64>,
}

impl PartialEq for Character {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.basis, &other.basis) && self.exps == other.exps
    }
}
impl Eq for Character {}

impl std::fmt::Debug for Character {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Character{:?}", self.exps)
    }
}

impl Character {
    /// Exponent of ζ_M at the subgroup element with this id.
    pub fn zeta_exp(&self, m: u64, id: u64) -> u64 {
        let pos = self.basis.pos(id).expect("element outside character domain");
        let coords = self.basis.coords_at(pos);
        let mut acc = 0u64;
        for i in 0..self.basis.rank {
            let step = m / self.basis.orders[i];
            acc = (acc + self.exps[i] * step % m * coords[i] as u64) % m;
        }
        acc
    }

    pub fn eval(&self, cyc: &CycCtx, id: u64) -> CycInt {
        cyc.zeta(self.zeta_exp(cyc.m, id) as i64)
    }

    /// exponent per position, for hot loops
    pub fn exp_table(&self, m: u64) -> Vec<u16> {
        (0..self.basis.size())
            .map(|pos| {
                let coords = self.basis.coords_at(pos as u32);
                let mut acc = 0u64;
                for i in 0..self.basis.rank {
                    let step = m / self.basis.orders[i];
                    acc = (acc + self.exps[i] * step % m * coords[i] as u64) % m;
                }
                acc as u16
            })
            .collect()
    }
}

/// All characters of the basis, in ascending exponent-tuple order.
pub fn all_characters(basis: &Arc<AbelianBasis>) -> Vec<Character> {
    let mut out = Vec::new();
    let rank = basis.rank;
    let mut exps = vec![0u64; rank];
    loop {
        out.push(Character {
            basis: basis.clone(),
            exps: exps.clone(),
        });
        let mut k = 0;
        loop {
            if k == rank {
                return out;
            }
            exps[k] += 1;
            if exps[k] < basis.orders[k] {
                break;
            }
            exps[k] = 0;
            k += 1;
        }
    }
}

/// Class function with exact cyclotomic values, stored per conjugacy class
/// (functions on U) or densely (functions on a subgroup).
#[derive(Clone, PartialEq, Eq, Debug)]
pub enum ClassFunction {
    /// sorted (class index, value) pairs; absent classes are zero
    ByClass(Vec<(u32, CycInt)>),
    /// aligned with a subgroup enumeration
    Dense { ids: Vec<u64>, vals: Vec<CycInt> },
}

impl ClassFunction {
    pub fn eval(&self, g: &GroupCtx, cyc: &CycCtx, id: u64) -> CycInt {
        match self {
            ClassFunction::ByClass(v) => {
                let cid = g.classes().class_of[id as usize];
                match v.binary_search_by_key(&cid, |e| e.0) {
                    Ok(i) => v[i].1.clone(),
                    Err(_) => cyc.zero(),
                }
            }
            ClassFunction::Dense { ids, vals } => {
                match ids.binary_search(&id) {
                    Ok(i) => vals[i].clone(),
                    Err(_) => panic!("id outside dense class-function domain"),
                }
            }
        }
    }

    pub fn add(&self, cyc: &CycCtx, other: &ClassFunction) -> ClassFunction {
        match (self, other) {
            (ClassFunction::Dense { ids, vals }, ClassFunction::Dense { ids: i2, vals: v2 }) => {
                assert_eq!(ids, i2);
                ClassFunction::Dense {
                    ids: ids.clone(),
                    vals: vals
                        .iter()
                        .zip(v2.iter())
                        .map(|(a, b)| cyc.add(a, b))
                        .collect(),
                }
            }
            (ClassFunction::ByClass(a), ClassFunction::ByClass(b)) => {
                let mut out: Vec<(u32, CycInt)> = Vec::new();
                let (mut i, mut j) = (0, 0);
                while i < a.len() || j < b.len() {
                    if j >= b.len() || (i < a.len() && a[i].0 < b[j].0) {
                        out.push(a[i].clone());
                        i += 1;
                    } else if i >= a.len() || b[j].0 < a[i].0 {
                        out.push(b[j].clone());
                        j += 1;
                    } else {
                        out.push((a[i].0, cyc.add(&a[i].1, &b[j].1)));
                        i += 1;
                        j += 1;
                    }
                }
                out.retain(|(_, v)| !cyc.is_zero(v));
                ClassFunction::ByClass(out)
            }
            _ => panic!("mixed class-function domains"),
        }
    }

    pub fn scale(&self, cyc: &CycCtx, n: i64) -> ClassFunction {
        match self {
            ClassFunction::Dense { ids, vals } => ClassFunction::Dense {
                ids: ids.clone(),
                vals: vals.iter().map(|v| cyc.scale(v, n)).collect(),
            },
            ClassFunction::ByClass(v) => {
                ClassFunction::ByClass(v.iter().map(|(c, x)| (*c, cyc.scale(x, n))).collect())
            }
        }
    }
}

/// Character-theory context: group, cyclotomic ring, and the basis of H.
pub struct CharCtx {
    pub g: Arc<GroupCtx>,
    pub cyc: CycCtx,
    pub h_basis: Arc<AbelianBasis>,
}

impl CharCtx {
    pub fn new(g: Arc<GroupCtx>) -> Result<CharCtx> {
        let hsub = g.subgroup(SubgroupName::H)?;
        let h_basis = Arc::new(AbelianBasis::build(&g, &hsub)?);
        let m = lcm(
            lcm(h_basis.exponent(), g.gf.p),
            g.q2 - 1,
        );
        Ok(CharCtx {
            cyc: CycCtx::new(m),
            g,
            h_basis,
        })
    }

    pub fn m(&self) -> u64 {
        self.cyc.m
    }

    /// Exponent of ζ_M corresponding to ζ_p^t.
    pub fn psi_exp(&self, psi: &AddChar, idx: u16) -> u64 {
        (self.m() / self.g.gf.p) * psi.exp_at(idx) as u64
    }

    /// Position of the H-element with the same even coefficients as v.
    pub fn even_part_pos(&self, v: &Uv) -> u32 {
        let g = &self.g;
        let mut id = 0u64;
        for k in (0..g.nc).rev() {
            let digit = if k % 2 == 1 { v[k] as u64 } else { 0 };
            id = id * g.q2 + digit;
        }
        self.h_basis.pos(id).expect("even part must lie in H")
    }

    /// Characters of H restricting to ψ on H_{2(h−1)} (the set A_ψ).
    pub fn a_psi(&self, psi: &AddChar) -> Vec<Character> {
        let g = &self.g;
        let m = self.m();
        let tops: Vec<(u64, u64)> = (0..g.q2)
            .map(|e| {
                let mut uv: Uv = g.id_to_uv(0);
                uv[g.nc - 1] = e as u16;
                (g.uv_to_id(&uv), self.psi_exp(psi, e as u16))
            })
            .collect();
        all_characters(&self.h_basis)
            .into_iter()
            .filter(|chi| tops.iter().all(|&(id, t)| chi.zeta_exp(m, id) == t))
            .collect()
    }

    /// Characters of `s_basis` whose restriction to the subgroup T matches
    /// the exponent function `target` (ids of T must lie inside S).
    pub fn characters_restricting(
        &self,
        s_basis: &Arc<AbelianBasis>,
        t: &Subgroup,
        target: &dyn Fn(u64) -> u64,
    ) -> Result<Vec<Character>> {
        let g = &self.g;
        let t_ids: Vec<u64> = g.enumerate(t).iter().map(|v| g.uv_to_id(v)).collect();
        for &id in &t_ids {
            if s_basis.pos(id).is_none() {
                return Err(Error::DomainMismatch);
            }
        }
        let m = self.m();
        Ok(all_characters(s_basis)
            .into_iter()
            .filter(|chi| t_ids.iter().all(|&id| chi.zeta_exp(m, id) == target(id)))
            .collect())
    }

    // ---- the standard extensions ----

    /// ψ̃ on H₀′: 1 + Σ a_i τ^i ↦ ψ(a_{2(h−1)}); exponent form.
    pub fn psi_tilde_exp(&self, psi: &AddChar, v: &Uv) -> u64 {
        self.psi_exp(psi, v[self.g.nc - 1])
    }

    /// χ^♯ on K = N_{h−1}: evaluate χ on the even part; exponent form.
    pub fn chi_sharp_exp(&self, chi_table: &[u16], v: &Uv) -> u64 {
        chi_table[self.even_part_pos(v) as usize] as u64
    }

    /// The q extensions of ψ̃ to H₁′ (h even).
    pub fn theta_extensions(&self, psi: &AddChar) -> Result<Vec<(Arc<AbelianBasis>, Character)>> {
        let g = &self.g;
        if g.h % 2 != 0 {
            return Err(Error::SubgroupParity("H1'".into(), g.h));
        }
        let h1 = g.subgroup(SubgroupName::H1Prime)?;
        let basis = Arc::new(AbelianBasis::build(g, &h1)?);
        let h0 = g.subgroup(SubgroupName::H0Prime)?;
        let target = |id: u64| {
            let v = g.id_to_uv(id);
            self.psi_tilde_exp(psi, &v)
        };
        let found = self.characters_restricting(&basis, &h0, &target)?;
        assert_eq!(found.len() as u64, g.q, "there are q extensions of ψ̃ to H₁′");
        Ok(found.into_iter().map(|c| (basis.clone(), c)).collect())
    }

    /// χ̃_θ(kn) = χ(k)θ(n) on H′ (h even); exponent form. Uses the
    /// factorization with k = the even part of the element.
    pub fn chi_tilde_exp(
        &self,
        chi_table: &[u16],
        theta: &Character,
        theta_table: &[u16],
        v: &Uv,
    ) -> u64 {
        let g = &self.g;
        let m = self.m();
        let kpos = self.even_part_pos(v);
        // k = even part (top included); n = k⁻¹·v ∈ H₁′
        let mut kuv: Uv = v.clone();
        for i in (1..=g.nc).step_by(2) {
            kuv[i - 1] = 0;
        }
        let n = g.mul_uv(&g.inv_uv(&kuv), v);
        let npos = theta
            .basis
            .pos(g.uv_to_id(&n))
            .expect("odd part must lie in H1'");
        (chi_table[kpos as usize] as u64 + theta_table[npos as usize] as u64) % m
    }

    /// Check multiplicativity of an exponent-valued function on a subgroup
    /// (exhaustive when the subgroup is small, sampled otherwise).
    pub fn verify_multiplicative(
        &self,
        sub: &Subgroup,
        f: &dyn Fn(&Uv) -> u64,
        sample: usize,
    ) -> bool {
        use rand::{Rng, SeedableRng};
        let g = &self.g;
        let m = self.m();
        let elems = g.enumerate(sub);
        let n = elems.len();
        let check = |a: &Uv, b: &Uv| -> bool {
            let ab = g.mul_uv(a, b);
            (f(a) + f(b)) % m == f(&ab)
        };
        if n * n <= 250_000 {
            elems
                .iter()
                .all(|a| elems.iter().all(|b| check(&a.clone(), b)))
        } else {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0x5eed);
            (0..sample).all(|_| {
                let a = &elems[rng.gen_range(0..n)];
                let b = &elems[rng.gen_range(0..n)];
                check(&a.clone(), b)
            })
        }
    }

    // ---- induction ----

    /// Frobenius-formula induced class function Ind_S^U(ν), for ν given in
    /// exponent form on the members of S. Computed per conjugacy class:
    /// Ind(s) = (|U|/(|S|·|class(s)|)) · Σ_{c ∈ class(s) ∩ S} ν(c).
    pub fn induce_from(&self, sub: &Subgroup, nu: &dyn Fn(&Uv) -> u64) -> ClassFunction {
        let g = &self.g;
        let cyc = &self.cyc;
        let cls = g.classes();
        let m = self.m() as usize;
        let members = g.enumerate(sub);
        let mut buckets: HashMap<u32, Vec<i64>> = HashMap::new();
        for v in &members {
            let id = g.uv_to_id(v);
            let cid = cls.class_of[id as usize];
            let e = nu(v) as usize;
            buckets.entry(cid).or_insert_with(|| vec![0i64; m])[e] += 1;
        }
        let index = g.order() as i64 / g.subgroup_size(sub) as i64;
        let mut out: Vec<(u32, CycInt)> = Vec::new();
        let mut keys: Vec<u32> = buckets.keys().copied().collect();
        keys.sort_unstable();
        for cid in keys {
            let counts = &buckets[&cid];
            let mut s = cyc.zero();
            for (k, &c) in counts.iter().enumerate() {
                if c != 0 {
                    cyc.add_assign(&mut s, &cyc.scale(&cyc.zeta(k as i64), c));
                }
            }
            let num = cyc.scale(&s, index);
            let val = cyc
                .div_exact(&num, cls.sizes[cid as usize] as i64)
                .expect("induced values are algebraic integers");
            if !cyc.is_zero(&val) {
                out.push((cid, val));
            }
        }
        ClassFunction::ByClass(out)
    }

    /// Induction between abelian subgroups of H: Ind_{S}^{H}(χ) as a dense
    /// function on H (conjugation is trivial inside abelian H).
    pub fn induce_abelian_to_h(&self, s: &Subgroup, chi: &Character) -> ClassFunction {
        let g = &self.g;
        let cyc = &self.cyc;
        let index = (self.h_basis.size() / g.subgroup_size(s) as u64) as i64;
        let ids = self.h_basis.elems.clone();
        let vals = ids
            .iter()
            .map(|&id| {
                let v = g.id_to_uv(id);
                if self.g.contains_uv(s, &v) {
                    cyc.scale(&chi.eval(cyc, id), index)
                } else {
                    cyc.zero()
                }
            })
            .collect();
        ClassFunction::Dense { ids, vals }
    }

    /// ρ_χ as a class function on U: induced from H′ using χ^♯ (h odd) or
    /// χ̃_θ with the first extension θ (h even; the choice does not change
    /// the induced character).
    pub fn rho_chi(&self, psi: &AddChar, chi: &Character) -> Result<ClassFunction> {
        let g = &self.g;
        let hp = g.subgroup(SubgroupName::HPrime)?;
        let chi_table = chi.exp_table(self.m());
        if g.h % 2 == 1 {
            Ok(self.induce_from(&hp, &|v| self.chi_sharp_exp(&chi_table, v)))
        } else {
            let thetas = self.theta_extensions(psi)?;
            let (_, theta) = &thetas[0];
            let theta_table = theta.exp_table(self.m());
            Ok(self.induce_from(&hp, &|v| {
                self.chi_tilde_exp(&chi_table, theta, &theta_table, v)
            }))
        }
    }

    // ---- inner products ----

    /// ⟨f1, f2⟩_S = (1/|S|) Σ_{s∈S} f1(s)·conj(f2(s)) as an exact rational.
    pub fn inner_product(
        &self,
        f1: &ClassFunction,
        f2: &ClassFunction,
        s: &Subgroup,
    ) -> Result<Rat> {
        let g = &self.g;
        let cyc = &self.cyc;
        let mut acc = cyc.zero();
        for v in g.enumerate(s) {
            let id = g.uv_to_id(&v);
            let a = f1.eval(g, cyc, id);
            if cyc.is_zero(&a) {
                continue;
            }
            let b = f2.eval(g, cyc, id);
            if cyc.is_zero(&b) {
                continue;
            }
            cyc.add_assign(&mut acc, &cyc.mul(&a, &cyc.conj(&b)));
        }
        let n = cyc.as_integer(&acc)?;
        Ok(Rat::new(n, g.subgroup_size(s) as u64))
    }

    /// ⟨f1, f2⟩_U for two class functions on U, summed per class.
    pub fn inner_product_u(&self, f1: &ClassFunction, f2: &ClassFunction) -> Result<Rat> {
        let (ClassFunction::ByClass(a), ClassFunction::ByClass(b)) = (f1, f2) else {
            return Err(Error::DomainMismatch);
        };
        let g = &self.g;
        let cyc = &self.cyc;
        let sizes = &g.classes().sizes;
        let mut acc = cyc.zero();
        let (mut i, mut j) = (0, 0);
        while i < a.len() && j < b.len() {
            if a[i].0 < b[j].0 {
                i += 1;
            } else if b[j].0 < a[i].0 {
                j += 1;
            } else {
                let t = cyc.mul(&a[i].1, &cyc.conj(&b[j].1));
                cyc.add_assign(&mut acc, &cyc.scale(&t, sizes[a[i].0 as usize] as i64));
                i += 1;
                j += 1;
            }
        }
        let n = cyc.as_integer(&acc)?;
        Ok(Rat::new(n, g.order() as u64))
    }

    /// Degree of a class function on U (its value at the identity).
    pub fn degree(&self, f: &ClassFunction) -> Result<i64> {
        self.cyc.as_integer(&f.eval(&self.g, &self.cyc, 0))
    }

    // ---- closed forms over H ----

    /// Position data: s ∈ G_{h−2} → None, else Some(k) with
    /// s ∈ G_{h−2−k} ∖ G_{h−1−k}, 1 ≤ k ≤ h−2.
    pub fn depth_k(&self, v: &Uv) -> Option<usize> {
        let g = &self.g;
        let acc = g.gf.accel(0).unwrap();
        let h = g.h;
        // first even index 2i (i ≥ 1) with a_{2i} ∉ F_q
        let mut first_bad: Option<usize> = None;
        for i in 1..=h - 1 {
            if !acc.in_fq[v[2 * i - 1] as usize] {
                first_bad = Some(i);
                break;
            }
        }
        match first_bad {
            None => None,
            Some(i) if i >= h - 1 => None, // only the top coefficient leaves F_q
            Some(i) => Some(h - 1 - i),
        }
    }

    /// Tr ρ_χ(s) by the closed form: q^{h−1}·χ(s) on the center G_{h−2},
    /// (−1)^k·q^{h−1−k}·χ(s) on G_{h−2−k} ∖ G_{h−1−k}.
    pub fn trace_closed_form(&self, chi: &Character, v: &Uv) -> Result<CycInt> {
        let g = &self.g;
        let cyc = &self.cyc;
        let hsub = g.subgroup(SubgroupName::H)?;
        if !g.contains_uv(&hsub, v) {
            return Err(Error::NotInSubgroup("H".into()));
        }
        let id = g.uv_to_id(v);
        let chi_s = chi.eval(cyc, id);
        let (sign, pow) = match self.depth_k(v) {
            None => (1i64, (g.h - 1) as u32),
            Some(k) => (if k % 2 == 0 { 1 } else { -1 }, (g.h - 1 - k) as u32),
        };
        Ok(cyc.scale(&chi_s, sign * (g.q as i64).pow(pow)))
    }

    /// The virtual H-decomposition
    /// (−1)^h (q·χ + Σ_{i=1}^{h−2} (−1)^i (q+1)·Ind_{G_i}^H(χ)) as a dense
    /// class function on H.
    pub fn virtual_decomposition(&self, chi: &Character) -> Result<ClassFunction> {
        let g = &self.g;
        let cyc = &self.cyc;
        let ids = self.h_basis.elems.clone();
        let mut vals: Vec<CycInt> = ids
            .iter()
            .map(|&id| cyc.scale(&chi.eval(cyc, id), g.q as i64))
            .collect();
        for i in 1..=g.h - 2 {
            let gi = g.subgroup(SubgroupName::Gk(i))?;
            let ind = self.induce_abelian_to_h(&gi, chi);
            let coef = if i % 2 == 0 {
                g.q as i64 + 1
            } else {
                -(g.q as i64 + 1)
            };
            let ClassFunction::Dense { vals: iv, .. } = &ind else {
                unreachable!()
            };
            for (t, x) in vals.iter_mut().zip(iv.iter()) {
                cyc.add_assign(t, &cyc.scale(x, coef));
            }
        }
        let sign = if g.h % 2 == 0 { 1 } else { -1 };
        let vals = vals.iter().map(|v| cyc.scale(v, sign)).collect();
        Ok(ClassFunction::Dense { ids, vals })
    }

    /// Multiplicity of the H-character θ in ρ_χ, via the virtual decomposition.
    pub fn multiplicity(&self, chi: &Character, theta: &Character) -> Result<i64> {
        let cyc = &self.cyc;
        let vd = self.virtual_decomposition(chi)?;
        let m = self.m();
        let ClassFunction::Dense { ids, vals } = &vd else {
            unreachable!()
        };
        let mut acc = cyc.zero();
        for (&id, v) in ids.iter().zip(vals.iter()) {
            let e = theta.zeta_exp(m, id);
            cyc.add_assign(&mut acc, &cyc.mul_zeta(v, -(e as i64)));
        }
        let n = cyc.as_integer(&acc)?;
        let r = Rat::new(n, self.h_basis.size());
        r.as_integer()
            .map_err(|_| Error::InexactDivision)
            .or(Err(Error::InexactDivision))
    }

    /// Expected multiplicity pattern: 1 or q for θ = χ (by parity of h),
    /// q+1 on the even-k agreement window, 0 otherwise.
    pub fn multiplicity_pattern(&self, chi: &Character, theta: &Character) -> Result<i64> {
        let g = &self.g;
        let m = self.m();
        let agree_on = |j: usize| -> bool {
            let gj = g.subgroup(SubgroupName::Gk(j)).unwrap();
            g.enumerate(&gj)
                .iter()
                .all(|v| {
                    let id = g.uv_to_id(v);
                    chi.zeta_exp(m, id) == theta.zeta_exp(m, id)
                })
        };
        if !agree_on(g.h - 2) {
            return Ok(0);
        }
        // smallest j with agreement on G_j
        let mut jstar = g.h - 2;
        while jstar > 0 && agree_on(jstar - 1) {
            jstar -= 1;
        }
        if jstar == 0 {
            return Ok(if g.h % 2 == 1 { 1 } else { g.q as i64 });
        }
        let k = g.h - 2 - jstar;
        Ok(if k % 2 == 0 { g.q as i64 + 1 } else { 0 })
    }

    // ---- semidirect product ⟨ζ⟩ ⋉ U ----

    /// Canonical generator of F_{q²}^×: the first element of multiplicative
    /// order q²−1 in canonical order.
    pub fn canonical_zeta(&self) -> u16 {
        let g = &self.g;
        let acc = g.gf.accel(0).unwrap();
        'outer: for i in 1..g.q2 as u16 {
            let mut cur = i as u32;
            for _ in 1..g.q2 - 1 {
                if cur == 1 {
                    continue 'outer;
                }
                cur = acc.mul_i(cur, i as u32);
            }
            if cur == 1 {
                return i;
            }
        }
        unreachable!("F_{{q²}}^× is cyclic")
    }

    /// Conjugation of U-coefficients by ζ^j: a_i ↦ ζ^{j(1−q^i)}·a_i.
    fn zeta_conj(&self, zpow: &[u16], j: u64, v: &Uv) -> Uv {
        let g = &self.g;
        let acc = g.gf.accel(0).unwrap();
        let ord = g.q2 - 1;
        let mut out = v.clone();
        for i in 1..=g.nc {
            let qi = if i % 2 == 0 { 1 } else { g.q % ord };
            let e = (j * ((ord + 1 - qi) % ord)) % ord;
            out[i - 1] = acc.mul_i(zpow[e as usize] as u32, v[i - 1] as u32) as u16;
        }
        out
    }

    /// Per-H-position tally of χ^♯-arguments in the semidirect induced trace
    /// at ζ^t: conjugating ζ^t by ζ^m·u lands on ζ^t·φ_m(φ_{−t}(u)·u^{−1}),
    /// and φ_m fixes every even coefficient, so the ⟨ζ⟩-part contributes a
    /// clean factor of q²−1 and one pass over U suffices.
    pub fn semidirect_trace_tally(&self, zeta: u16, t: u64) -> Result<Vec<u64>> {
        let g = &self.g;
        if g.h % 2 != 1 {
            return Err(Error::RequiresOddLevel);
        }
        let ord = g.q2 - 1;
        let acc = g.gf.accel(0).unwrap();
        let mut zpow = vec![1u16; ord as usize];
        for k in 1..ord as usize {
            zpow[k] = acc.mul_i(zpow[k - 1] as u32, zeta as u32) as u16;
        }
        let hp = g.subgroup(SubgroupName::HPrime)?;
        let mut tally = vec![0u64; self.h_basis.size() as usize];
        let n = g.order() as u64;
        let tt = t % ord;
        for uid in 0..n {
            let u = g.id_to_uv(uid);
            let d = g.mul_uv(&self.zeta_conj(&zpow, (ord - tt) % ord, &u), &g.inv_uv(&u));
            if g.contains_uv(&hp, &d) {
                tally[self.even_part_pos(&d) as usize] += 1;
            }
        }
        Ok(tally)
    }

    /// Trace at ζ^t of the induced character Ind_{⟨ζ⟩⋉H′}^{⟨ζ⟩⋉U}(ν) where
    /// ν(ζ^m·u) = ζ_M^{θ_exp·m}·χ^♯(u). Odd h only. θ_exp is the exponent of
    /// θ(ζ) as a power of ζ_M (must be a multiple of M/(q²−1)).
    pub fn semidirect_trace_at_zeta(
        &self,
        chi: &Character,
        zeta: u16,
        theta_exp: u64,
        t: u64,
    ) -> Result<CycInt> {
        let tally = self.semidirect_trace_tally(zeta, t)?;
        self.semidirect_trace_from_tally(&tally, chi, theta_exp, t)
    }

    pub fn semidirect_trace_from_tally(
        &self,
        tally: &[u64],
        chi: &Character,
        theta_exp: u64,
        t: u64,
    ) -> Result<CycInt> {
        let g = &self.g;
        let cyc = &self.cyc;
        let m = self.m();
        let ord = g.q2 - 1;
        assert_eq!(theta_exp % (m / ord), 0, "θ(ζ) must be a (q²−1)-th root");
        let chi_table = chi.exp_table(m);
        let mut acc_sum = cyc.zero();
        for (pos, &cnt) in tally.iter().enumerate() {
            if cnt == 0 {
                continue;
            }
            let e = (theta_exp * (t % ord) + chi_table[pos] as u64) % m;
            cyc.add_assign(
                &mut acc_sum,
                &cyc.scale(&cyc.zeta(e as i64), cnt as i64),
            );
        }
        let hp = g.subgroup(SubgroupName::HPrime)?;
        let hp_size = g.subgroup_size(&hp) as i64;
        cyc.div_exact(&acc_sum, hp_size)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gf::FieldCtx;

    fn cc(p: u64, h: usize) -> CharCtx {
        let gf = Arc::new(FieldCtx::make_tower(p, 1, 2).unwrap());
        let g = Arc::new(GroupCtx::new(gf, h).unwrap());
        CharCtx::new(g).unwrap()
    }

    #[test]
    fn conductor_counts() {
        let c = cc(3, 3);
        let g = &c.g;
        let psi0 = AddChar::new(g, g.gf.zero(0));
        assert_eq!(psi0.conductor(g), 1);
        let psi1 = AddChar::new(g, g.gf.one(0));
        assert_eq!(psi1.conductor(g), 1);
        assert!(psi1.is_additive(g));
        let n2 = (0..9)
            .filter(|&i| AddChar::new(g, g.gf.elem_from_index(0, i)).conductor(g) == 2)
            .count() as u64;
        assert_eq!(n2, 9 - 3); // q² − q
        assert_eq!(canonical_psi(g).conductor(g), 2);
    }

    #[test]
    fn h_basis_structure() {
        let c3 = cc(3, 3);
        // |H| = q^{2(h−1)} = 81; exponent p at h=3
        assert_eq!(c3.h_basis.size(), 81);
        assert_eq!(c3.h_basis.exponent(), 3);
        assert_eq!(c3.m(), 24); // lcm(3, 3, 8)
        let c4 = cc(3, 4);
        assert_eq!(c4.h_basis.size(), 729);
        // H contains an element of order p² = 9 when h = 4
        assert_eq!(c4.h_basis.exponent(), 9);
        assert_eq!(c4.m(), 72);
        // top layer is elementary abelian with 2f generators of order p
        let g = &c3.g;
        let top = g.subgroup(SubgroupName::Hk(4)).unwrap();
        let tb = AbelianBasis::build(g, &top).unwrap();
        assert_eq!(tb.rank, 2);
        assert!(tb.orders.iter().all(|&o| o == 3));
        // |characters(S)| = |S|
        assert_eq!(all_characters(&Arc::new(tb)).len(), 9);
    }

    #[test]
    fn order_p2_element_oracle() {
        // (1 + aτ²)^p = 1 + a^p τ^{2p}: nontrivial at h = 4, so order p² exists
        let c = cc(3, 4);
        let g = &c.g;
        let x = g.one_term(2, &g.gf.one(0));
        let xv = g.elem_to_uv(&x).unwrap();
        let cube = g.mul_uv(&g.mul_uv(&xv, &xv), &xv);
        assert_ne!(g.uv_to_id(&cube), 0, "cube is 1 + τ⁶ ≠ 1");
        let nine = g.mul_uv(&g.mul_uv(&cube, &cube), &cube);
        assert_eq!(g.uv_to_id(&nine), 0);
    }

    #[test]
    fn a_psi_counts() {
        let c = cc(3, 3);
        let psi = canonical_psi(&c.g);
        let apsi = c.a_psi(&psi);
        assert_eq!(apsi.len(), 9); // q^{2(h−2)}
        let c4 = cc(3, 4);
        let psi4 = canonical_psi(&c4.g);
        assert_eq!(c4.a_psi(&psi4).len(), 81);
    }

    #[test]
    fn chi_sharp_is_multiplicative_and_extends_psi() {
        let c = cc(3, 3);
        let g = &c.g;
        let psi = canonical_psi(g);
        let m = c.m();
        let ksub = g.subgroup(SubgroupName::K).unwrap();
        for chi in c.a_psi(&psi) {
            let table = chi.exp_table(m);
            assert!(c.verify_multiplicative(&ksub, &|v| c.chi_sharp_exp(&table, v), 0));
            // restriction to H_{2(h−1)} is ψ
            for e in 0..g.q2 as u16 {
                let mut uv = g.id_to_uv(0);
                uv[g.nc - 1] = e;
                assert_eq!(c.chi_sharp_exp(&table, &uv), c.psi_exp(&psi, e));
            }
        }
    }

    #[test]
    fn theta_extensions_even_case() {
        let c = cc(3, 4);
        let g = &c.g;
        let psi = canonical_psi(g);
        let thetas = c.theta_extensions(&psi).unwrap();
        assert_eq!(thetas.len(), 3); // q extensions
        let hp = g.subgroup(SubgroupName::HPrime).unwrap();
        let chi = &c.a_psi(&psi)[1];
        let chi_table = chi.exp_table(c.m());
        for (_, theta) in &thetas {
            let tt = theta.exp_table(c.m());
            assert!(c.verify_multiplicative(&hp, &|v| c.chi_tilde_exp(&chi_table, theta, &tt, v), 4000));
        }
        // odd h errors out
        let c3 = cc(3, 3);
        assert!(c3.theta_extensions(&canonical_psi(&c3.g)).is_err());
    }

    #[test]
    fn induce_identity_and_degree() {
        let c = cc(3, 3);
        let g = &c.g;
        let psi = canonical_psi(g);
        let chi = &c.a_psi(&psi)[0];
        // degree of ρ_χ = [U : H′]·1 = q^{h−1}
        let rho = c.rho_chi(&psi, chi).unwrap();
        assert_eq!(c.degree(&rho).unwrap(), 9);
        // induce(S, S, ν) = ν for an abelian S inside H
        let g1 = g.subgroup(SubgroupName::Gk(0)).unwrap(); // G_0 = H
        let ind = c.induce_abelian_to_h(&g1, chi);
        for &id in c.h_basis.elems.iter().step_by(5) {
            assert_eq!(ind.eval(g, &c.cyc, id), chi.eval(&c.cyc, id));
        }
    }

    #[test]
    fn rho_irreducible_distinct_33() {
        let c = cc(3, 3);
        let psi = canonical_psi(&c.g);
        let apsi = c.a_psi(&psi);
        let rhos: Vec<ClassFunction> = apsi
            .iter()
            .map(|chi| c.rho_chi(&psi, chi).unwrap())
            .collect();
        for (i, r1) in rhos.iter().enumerate() {
            for (j, r2) in rhos.iter().enumerate() {
                let ip = c.inner_product_u(r1, r2).unwrap();
                let expect = if i == j { 1 } else { 0 };
                assert_eq!(ip.as_integer().unwrap(), expect, "⟨ρ{i}, ρ{j}⟩");
            }
        }
    }

    #[test]
    fn trace_closed_form_vs_induction_33() {
        let c = cc(3, 3);
        let g = &c.g;
        let psi = canonical_psi(g);
        let hsub = g.subgroup(SubgroupName::H).unwrap();
        for chi in c.a_psi(&psi) {
            let rho = c.rho_chi(&psi, &chi).unwrap();
            for v in g.enumerate(&hsub) {
                let id = g.uv_to_id(&v);
                let closed = c.trace_closed_form(&chi, &v).unwrap();
                let ind = rho.eval(g, &c.cyc, id);
                assert_eq!(closed, ind);
            }
        }
    }

    #[test]
    fn trace_h3_off_center_value() {
        // h=3: s ∈ H ∖ G_1 gives −q·χ(s)
        let c = cc(3, 3);
        let g = &c.g;
        let psi = canonical_psi(g);
        let chi = &c.a_psi(&psi)[0];
        let hsub = g.subgroup(SubgroupName::H).unwrap();
        let g1 = g.subgroup(SubgroupName::Gk(1)).unwrap();
        let mut seen = false;
        for v in g.enumerate(&hsub) {
            if g.contains_uv(&g1, &v) {
                continue;
            }
            seen = true;
            let id = g.uv_to_id(&v);
            let expect = c.cyc.scale(&chi.eval(&c.cyc, id), -3);
            assert_eq!(c.trace_closed_form(&chi, &v).unwrap(), expect);
        }
        assert!(seen);
        // identity: q^{h−1}
        let idv = g.id_to_uv(0);
        assert_eq!(
            c.cyc.as_integer(&c.trace_closed_form(chi, &idv).unwrap()).unwrap(),
            9
        );
    }

    #[test]
    fn decomposition_and_multiplicities_33() {
        let c = cc(3, 3);
        let g = &c.g;
        let psi = canonical_psi(g);
        let apsi = c.a_psi(&psi);
        let chi = &apsi[0];
        // virtual decomposition agrees with ρ_χ pointwise on H
        let rho = c.rho_chi(&psi, chi).unwrap();
        let vd = c.virtual_decomposition(chi).unwrap();
        let hsub = g.subgroup(SubgroupName::H).unwrap();
        for v in g.enumerate(&hsub) {
            let id = g.uv_to_id(&v);
            assert_eq!(vd.eval(g, &c.cyc, id), rho.eval(g, &c.cyc, id));
        }
        // multiplicity table over all characters of H matches the pattern
        for theta in all_characters(&c.h_basis) {
            let m1 = c.multiplicity(chi, &theta).unwrap();
            let m2 = c.multiplicity_pattern(chi, &theta).unwrap();
            assert_eq!(m1, m2);
            assert!(m1 == 0 || m1 == 1 || m1 == 4); // {1, q+1, 0} at h odd
        }
        // multiplicity(χ, χ) = 1 for odd h
        assert_eq!(c.multiplicity(chi, chi).unwrap(), 1);
        // total dimension check: Σ_θ mult·1 = q^{h−1}
        let total: i64 = all_characters(&c.h_basis)
            .iter()
            .map(|t| c.multiplicity(chi, t).unwrap())
            .sum();
        assert_eq!(total, 9);
    }

    #[test]
    fn v_psi_decomposes_33() {
        let c = cc(3, 3);
        let g = &c.g;
        let psi = canonical_psi(g);
        let h0 = g.subgroup(SubgroupName::H0Prime).unwrap();
        let vpsi = c.induce_from(&h0, &|v| c.psi_tilde_exp(&psi, v));
        // V_ψ = ⊕_{χ∈A_ψ} ρ_χ pointwise (h odd)
        let mut sum: Option<ClassFunction> = None;
        for chi in c.a_psi(&psi) {
            let rho = c.rho_chi(&psi, &chi).unwrap();
            sum = Some(match sum {
                None => rho,
                Some(s) => s.add(&c.cyc, &rho),
            });
        }
        assert_eq!(vpsi, sum.unwrap());
        // Lemma: ⟨ρ_χ|_{H₀′}, ψ̃⟩ ≥ 1
        for chi in c.a_psi(&psi) {
            let rho = c.rho_chi(&psi, &chi).unwrap();
            let mut acc = c.cyc.zero();
            for v in g.enumerate(&h0) {
                let id = g.uv_to_id(&v);
                let val = rho.eval(g, &c.cyc, id);
                let e = c.psi_tilde_exp(&psi, &v);
                c.cyc.add_assign(&mut acc, &c.cyc.mul_zeta(&val, -(e as i64)));
            }
            let n = c.cyc.as_integer(&acc).unwrap();
            let r = Rat::new(n, g.subgroup_size(&h0) as u64);
            assert!(r.as_integer().unwrap() >= 1);
        }
    }

    #[test]
    fn semidirect_conjugation_collapse() {
        // literal conjugation of ζ^t by ζ^m·u inside ⟨ζ⟩⋉U equals
        // (ζ^t, φ_m(φ_{−t}(u)·u^{−1})), the identity behind the tally
        let c = cc(3, 3);
        let g = &c.g;
        let acc = g.gf.accel(0).unwrap();
        let zeta = c.canonical_zeta();
        let ord = g.q2 - 1;
        let mut zpow = vec![1u16; ord as usize];
        for k in 1..ord as usize {
            zpow[k] = acc.mul_i(zpow[k - 1] as u32, zeta as u32) as u16;
        }
        let phi = |j: u64, v: &Uv| c.zeta_conj(&zpow, j % ord, v);
        let smul = |a: &(u64, Uv), b: &(u64, Uv)| -> (u64, Uv) {
            ((a.0 + b.0) % ord, g.mul_uv(&phi(ord - b.0 % ord, &a.1), &b.1))
        };
        let sinv = |a: &(u64, Uv)| -> (u64, Uv) {
            ((ord - a.0) % ord, phi(a.0, &g.inv_uv(&a.1)))
        };
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for _ in 0..300 {
            let m = rng.gen_range(0..ord);
            let uid = rng.gen_range(0..g.order() as u64);
            let t = rng.gen_range(1..ord);
            let ge = (m, g.id_to_uv(uid));
            // associativity sanity of the semidirect operations
            let other = (rng.gen_range(0..ord), g.id_to_uv(rng.gen_range(0..g.order() as u64)));
            let third = (rng.gen_range(0..ord), g.id_to_uv(rng.gen_range(0..g.order() as u64)));
            assert_eq!(
                smul(&smul(&ge, &other), &third),
                smul(&ge, &smul(&other, &third))
            );
            assert_eq!(smul(&ge, &sinv(&ge)), (0, g.id_to_uv(0)));
            let target = (t, g.id_to_uv(0));
            let conj = smul(&smul(&ge, &target), &sinv(&ge));
            assert_eq!(conj.0, t);
            let u = g.id_to_uv(uid);
            let d = g.mul_uv(&phi(ord - t, &u), &g.inv_uv(&u));
            assert_eq!(conj.1, phi(m, &d));
        }
    }

    #[test]
    fn semidirect_trace_33() {
        let c = cc(3, 3);
        let g = &c.g;
        let psi = canonical_psi(g);
        let zeta = c.canonical_zeta();
        let ord = g.q2 - 1;
        let theta_exp = c.m() / ord; // primitive choice of θ(ζ)
        for chi in c.a_psi(&psi).iter().take(3) {
            let tr = c
                .semidirect_trace_at_zeta(chi, zeta, theta_exp, 1)
                .unwrap();
            assert_eq!(tr, c.cyc.zeta(theta_exp as i64), "trace at ζ is θ(ζ)");
        }
        // rebased generator ζ' = ζ^k with gcd(k, q²−1) = 1: trace at ζ^k is θ(ζ)^k
        let chi = &c.a_psi(&psi)[1];
        for k in [3u64, 5, 7] {
            let tr = c.semidirect_trace_at_zeta(chi, zeta, theta_exp, k).unwrap();
            assert_eq!(tr, c.cyc.zeta((theta_exp * k) as i64));
        }
        // even h is rejected
        let c4 = cc(3, 4);
        let psi4 = canonical_psi(&c4.g);
        let chi4 = c4.a_psi(&psi4)[0].clone();
        let z4 = c4.canonical_zeta();
        assert!(c4.semidirect_trace_at_zeta(&chi4, z4, 1, 1).is_err());
    }
}
