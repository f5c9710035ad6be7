from setuptools import setup, find_packages
import os


#  Function to safely read README.md for the long description
def read_file(filename):
    with open(filename, encoding='utf-8') as f:
        return f.read()

long_description = read_file('README.md') if os.path.exists('README.md') else '' # noqa

setup(
    name='scenestats',
    version='0.1.0',
    packages=find_packages(exclude=['tests', 'tests.*']),
    include_package_data=True,
    package_data={'scenestats': ['data/*.txt']},
    license='MIT',
    description='Scene statistics of image-sequence datasets: lighting, '
                'entropy, edge, feature-matching and reprojection measures.',
    long_description=long_description,
    long_description_content_type='text/markdown',
    install_requires=[
        'django>=5.1',
        'djangorestframework>=3.12',
        'numpy>=1.22',
        'scipy>=1.8',
        'matplotlib>=3.5',
    ],
    entry_points={
        'console_scripts': [
            'scenestats=scenestats.__main__:main',
        ],
    },
    classifiers=[
        'Environment :: Console',
        'Framework :: Django',
        'Framework :: Django :: 5.1',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Scientific/Engineering :: Image Processing',
    ],
    python_requires='>=3.10',
)
