from setuptools import setup, find_packages


# Get version inside ecitarget/version.py without importing the package
exec(compile(open('ecitarget/version.py').read(),
             'ecitarget/version.py', 'exec'))

install_deps = [
    'appdirs',
    'numpy',
    'scipy',
    'pandas',
    'statsmodels',
    'matplotlib'
]

setup(
    name='ecitarget',
    version=__version__,
    packages=find_packages(exclude=('tests*', 'dev*')),
    description='Minimum-effort diversification portfolios that reach a'
                ' target economic complexity',
    long_description=open('README.md', 'r').read(),
    long_description_content_type='text/markdown',
    license='LGPL',

    classifiers=[
        'Development Status :: 4 - Beta',
        'Intended Audience :: Science/Research',
        'Topic :: Scientific/Engineering :: Information Analysis',
        'License :: OSI Approved :: GNU Lesser General Public License v3'
        ' (LGPLv3)',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.8',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
    ],
    keywords='economic complexity eci pci rca relatedness diversification'
             ' optimization',
    python_requires='>=3.8',
    install_requires=install_deps,
    extras_require={
        'dev': [
            'flake8',
            'hypothesis'
        ]
    },
    entry_points={
        'console_scripts': ['ecitarget = ecitarget.__main__:main']
    }
)
